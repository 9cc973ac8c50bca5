//! Forward and reverse-mode passes of the parameter-adaptive GNN.
//!
//! One layer is up to three blocks applied in order:
//!
//! ```text
//! format   F[v] = δ( c·(H[v]·Wf[t] + bf[t]) + (1−c)·H[v] )        t = fmt type of v, c = fmt confidence
//! content  C[v] = δ( c'·(F[v]·Wc[s] + bc[s]) )                     s = content type of v
//!          O[v] = α·C[v] + mean_{u∈N(v)} C[u] · W̃[s]              (target-typed aggregation)
//! regular  R[v] = δ( O[v]·Wr + mean_{u∈N(v)} O[u]·Wr )
//! ```
//!
//! Confidences are floored at `confidence_floor`. Layers past `format_layers`
//! skip the format block and layers past `content_layers` skip the content
//! block. A linear classifier maps the last layer to logits.

use super::{Activation, ContentParams, FormatParams, ModelError, PagnnConfig, PagnnParams, TypedAdjacency};
use crate::matrix::{outer_acc, vec_mat_into, vec_mat_t_into, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    InputProjection,
    Format,
    Content,
    Regular,
    Classifier,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Block::InputProjection => "input projection",
            Block::Format => "format block",
            Block::Content => "content block",
            Block::Regular => "regular block",
            Block::Classifier => "classifier",
        };
        f.write_str(s)
    }
}

/// One executed block; `layer` is 1-based (0 for the projection and classifier).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockCall {
    pub layer: usize,
    pub block: Block,
}

fn ensure_finite(m: &Matrix, layer: usize, block: Block) -> Result<(), ModelError> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { layer, block })
    }
}

fn activate(pre: &Matrix, act: Activation) -> Matrix {
    let mut out = pre.clone();
    out.as_mut_slice().iter_mut().for_each(|x| *x = act.apply(*x));
    out
}

fn floor_conf(c: f64, floor: f64) -> f64 {
    c.max(floor)
}

/// Pre-activation of the format block.
fn format_pre(h: &Matrix, adj: &TypedAdjacency, p: &FormatParams, floor: f64) -> Matrix {
    let d = p.weights[0].cols();
    let mut pre = Matrix::zeros(h.rows(), d);
    let mut affine = vec![0.0; d];
    for v in 0..h.rows() {
        let t = adj.format_index[v];
        let c = floor_conf(adj.format_confidence[v], floor);
        let x = h.row(v);
        vec_mat_into(x, &p.weights[t], &mut affine);
        for (a, b) in affine.iter_mut().zip(&p.biases[t]) {
            *a += b;
        }
        for ((o, &a), &xi) in pre.row_mut(v).iter_mut().zip(&affine).zip(x) {
            *o = c * a + (1.0 - c) * xi;
        }
    }
    pre
}

fn check_width(h: &Matrix, d: usize, what: &str) -> Result<(), ModelError> {
    if h.cols() != d {
        return Err(ModelError::Shape(format!("{what}: input width {} but block width {d}", h.cols())));
    }
    Ok(())
}

/// Format alignment block: a confidence-weighted blend of the node's
/// type-specific affine map and its unchanged input.
pub fn format_alignment_forward(
    h: &Matrix,
    adj: &TypedAdjacency,
    params: &FormatParams,
    activation: Activation,
    confidence_floor: f64,
) -> Result<Matrix, ModelError> {
    check_width(h, params.weights[0].rows(), "format block")?;
    ensure_finite(h, 0, Block::Format)?;
    Ok(activate(&format_pre(h, adj, params, confidence_floor), activation))
}

struct ContentIntermediates {
    pre: Matrix,
    agg: Matrix,
    out: Matrix,
}

fn content_pass(
    h: &Matrix,
    adj: &TypedAdjacency,
    p: &ContentParams,
    alpha: f64,
    act: Activation,
    floor: f64,
) -> ContentIntermediates {
    let n = h.rows();
    let d = p.weights[0].cols();
    let mut pre = Matrix::zeros(n, d);
    for v in 0..n {
        let s = adj.content_index[v];
        let c = floor_conf(adj.content_confidence[v], floor);
        let row = pre.row_mut(v);
        vec_mat_into(h.row(v), &p.weights[s], row);
        for (o, b) in row.iter_mut().zip(&p.biases[s]) {
            *o = c * (*o + b);
        }
    }
    let activated = activate(&pre, act);
    let agg = adj.mean_aggregate(&activated);
    let mut out = Matrix::zeros(n, d);
    let mut msg = vec![0.0; d];
    for v in 0..n {
        let s = adj.content_index[v];
        vec_mat_into(agg.row(v), &p.agg_weights[s], &mut msg);
        for ((o, &cv), &m) in out.row_mut(v).iter_mut().zip(activated.row(v)).zip(&msg) {
            *o = alpha * cv + m;
        }
    }
    ContentIntermediates {
        pre,
        agg,
        out,
    }
}

/// Content processing block: source-typed transform, then target-typed mean
/// aggregation with an `alpha`-weighted self term.
pub fn content_forward(
    h_fmt: &Matrix,
    adj: &TypedAdjacency,
    params: &ContentParams,
    alpha: f64,
    activation: Activation,
    confidence_floor: f64,
) -> Result<Matrix, ModelError> {
    check_width(h_fmt, params.weights[0].rows(), "content block")?;
    ensure_finite(h_fmt, 0, Block::Content)?;
    Ok(content_pass(h_fmt, adj, params, alpha, activation, confidence_floor).out)
}

struct RegularIntermediates {
    pre: Matrix,
    out: Matrix,
}

fn regular_pass(h: &Matrix, adj: &TypedAdjacency, w: &Matrix, act: Activation) -> RegularIntermediates {
    let lin = h.matmul(w);
    let mut pre = adj.mean_aggregate(&lin);
    for (p, &l) in pre.as_mut_slice().iter_mut().zip(lin.as_slice()) {
        *p += l;
    }
    let out = activate(&pre, act);
    RegularIntermediates { pre, out }
}

/// Regular learning block: shared weights, self term plus neighbor mean.
pub fn regular_forward(h: &Matrix, adj: &TypedAdjacency, w_rgn: &Matrix, activation: Activation) -> Result<Matrix, ModelError> {
    check_width(h, w_rgn.rows(), "regular block")?;
    Ok(regular_pass(h, adj, w_rgn, activation).out)
}

struct LayerCache {
    input: Matrix,
    format_pre: Option<Matrix>,
    after_format: Matrix,
    content: Option<ContentIntermediates>,
    regular: RegularIntermediates,
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardCache {
    projected: Matrix,
    layers: Vec<LayerCache>,
    logits: Matrix,
    trace: Vec<BlockCall>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        &self.logits
    }

    pub fn trace(&self) -> &[BlockCall] {
        &self.trace
    }

    /// Node representations after each layer's regular block.
    pub fn layer_outputs(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().map(|l| &l.regular.out)
    }

    /// Representation entering layer 1 (after the optional projection).
    pub fn projected_input(&self) -> &Matrix {
        &self.projected
    }
}

fn check_inputs(h0: &Matrix, adj: &TypedAdjacency, config: &PagnnConfig, params: &PagnnParams) -> Result<(), ModelError> {
    config.validate()?;
    params.check_shapes(config)?;
    adj.check_types(config.num_format_types, config.num_content_types)?;
    if h0.rows() != adj.node_count() {
        return Err(ModelError::Shape(format!(
            "feature rows {} != node count {}",
            h0.rows(),
            adj.node_count()
        )));
    }
    if h0.cols() != config.input_dim {
        return Err(ModelError::Shape(format!(
            "feature width {} != configured input_dim {}",
            h0.cols(),
            config.input_dim
        )));
    }
    ensure_finite(h0, 0, Block::InputProjection)
}

/// Full forward pass retaining intermediates.
pub fn forward_cached(
    h0: &Matrix,
    adj: &TypedAdjacency,
    config: &PagnnConfig,
    params: &PagnnParams,
) -> Result<ForwardCache, ModelError> {
    check_inputs(h0, adj, config, params)?;
    let act = config.activation;
    let floor = config.confidence_floor;
    let mut trace = Vec::new();
    let projected = match &params.input_projection {
        Some(p) => {
            trace.push(BlockCall {
                layer: 0,
                block: Block::InputProjection,
            });
            let x = h0.matmul(p);
            ensure_finite(&x, 0, Block::InputProjection)?;
            x
        }
        None => h0.clone(),
    };

    let mut layers = Vec::with_capacity(config.layers);
    let mut x = projected.clone();
    for (l, lp) in params.layers.iter().enumerate() {
        let layer_no = l + 1;
        let (format_pre, after_format) = match &lp.format {
            Some(fp) => {
                trace.push(BlockCall {
                    layer: layer_no,
                    block: Block::Format,
                });
                let pre = format_pre(&x, adj, fp, floor);
                let out = activate(&pre, act);
                ensure_finite(&out, layer_no, Block::Format)?;
                (Some(pre), out)
            }
            None => (None, x.clone()),
        };
        let content = match &lp.content {
            Some(cp) => {
                trace.push(BlockCall {
                    layer: layer_no,
                    block: Block::Content,
                });
                let c = content_pass(&after_format, adj, cp, config.alpha, act, floor);
                ensure_finite(&c.out, layer_no, Block::Content)?;
                Some(c)
            }
            None => None,
        };
        trace.push(BlockCall {
            layer: layer_no,
            block: Block::Regular,
        });
        let regular = {
            let input = content.as_ref().map_or(&after_format, |c| &c.out);
            regular_pass(input, adj, &lp.regular, act)
        };
        ensure_finite(&regular.out, layer_no, Block::Regular)?;
        let next = regular.out.clone();
        layers.push(LayerCache {
            input: std::mem::replace(&mut x, next),
            format_pre,
            after_format,
            content,
            regular,
        });
    }

    trace.push(BlockCall {
        layer: 0,
        block: Block::Classifier,
    });
    let mut logits = x.matmul(&params.classifier);
    for v in 0..logits.rows() {
        for (o, b) in logits.row_mut(v).iter_mut().zip(&params.classifier_bias) {
            *o += b;
        }
    }
    ensure_finite(&logits, 0, Block::Classifier)?;
    Ok(ForwardCache {
        projected,
        layers,
        logits,
        trace,
    })
}

/// Logits (`node_count × num_classes`).
pub fn pagnn_forward(h0: &Matrix, adj: &TypedAdjacency, config: &PagnnConfig, params: &PagnnParams) -> Result<Matrix, ModelError> {
    Ok(forward_cached(h0, adj, config, params)?.logits)
}

/// Gradients of a scalar objective with respect to every parameter and the
/// input features.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: PagnnParams,
    pub input: Matrix,
}

fn mask_by_derivative(grad: &mut Matrix, pre: &Matrix, act: Activation) {
    for (g, &p) in grad.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        *g *= act.derivative(p);
    }
}

/// Reverse pass from `upstream = ∂objective/∂logits`.
pub fn backward_from_cache(
    cache: &ForwardCache,
    h0: &Matrix,
    adj: &TypedAdjacency,
    config: &PagnnConfig,
    params: &PagnnParams,
    upstream: &Matrix,
) -> Result<Gradients, ModelError> {
    if upstream.shape() != cache.logits.shape() {
        return Err(ModelError::Shape(format!(
            "upstream gradient shape {:?} != logits shape {:?}",
            upstream.shape(),
            cache.logits.shape()
        )));
    }
    let act = config.activation;
    let floor = config.confidence_floor;
    let n = adj.node_count();
    let mut grads = params.zeros_like();

    let last = cache.layers.last().map_or(&cache.projected, |l| &l.regular.out);
    grads.classifier = last.t_matmul(upstream);
    for v in 0..n {
        for (g, &u) in grads.classifier_bias.iter_mut().zip(upstream.row(v)) {
            *g += u;
        }
    }
    let mut dx = upstream.matmul_t(&params.classifier);

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[l];
        let lg = &mut grads.layers[l];

        // Regular block.
        let mut d_pre = dx;
        mask_by_derivative(&mut d_pre, &lc.regular.pre, act);
        let mut d_lin = d_pre.clone();
        adj.mean_aggregate_backward(&d_pre, &mut d_lin);
        let reg_input = lc.content.as_ref().map_or(&lc.after_format, |c| &c.out);
        lg.regular = reg_input.t_matmul(&d_lin);
        let mut d_in = d_lin.matmul_t(&lp.regular);

        // Content block.
        if let (Some(c), Some(cp), Some(cg)) = (&lc.content, &lp.content, &mut lg.content) {
            let d = cp.weights[0].cols();
            let mut d_act = Matrix::zeros(n, d);
            let mut d_agg = Matrix::zeros(n, d);
            for v in 0..n {
                let s = adj.content_index[v];
                let dout = d_in.row(v);
                outer_acc(&mut cg.agg_weights[s], c.agg.row(v), dout, 1.0);
                vec_mat_t_into(dout, &cp.agg_weights[s], d_agg.row_mut(v));
                for (a, &g) in d_act.row_mut(v).iter_mut().zip(dout) {
                    *a = config.alpha * g;
                }
            }
            adj.mean_aggregate_backward(&d_agg, &mut d_act);
            mask_by_derivative(&mut d_act, &c.pre, act);
            let mut d_fmt = Matrix::zeros(n, cp.weights[0].rows());
            let mut scaled = vec![0.0; d];
            for v in 0..n {
                let s = adj.content_index[v];
                let cv = floor_conf(adj.content_confidence[v], floor);
                for (o, &g) in scaled.iter_mut().zip(d_act.row(v)) {
                    *o = cv * g;
                }
                outer_acc(&mut cg.weights[s], lc.after_format.row(v), &scaled, 1.0);
                for (b, &g) in cg.biases[s].iter_mut().zip(&scaled) {
                    *b += g;
                }
                vec_mat_t_into(&scaled, &cp.weights[s], d_fmt.row_mut(v));
            }
            d_in = d_fmt;
        }

        // Format block.
        if let (Some(pre), Some(fp), Some(fg)) = (&lc.format_pre, &lp.format, &mut lg.format) {
            let mut d_pre = d_in;
            mask_by_derivative(&mut d_pre, pre, act);
            let mut d_x = Matrix::zeros(n, fp.weights[0].rows());
            let mut scaled = vec![0.0; d_pre.cols()];
            let mut through_w = vec![0.0; fp.weights[0].rows()];
            for v in 0..n {
                let t = adj.format_index[v];
                let c = floor_conf(adj.format_confidence[v], floor);
                for (o, &g) in scaled.iter_mut().zip(d_pre.row(v)) {
                    *o = c * g;
                }
                outer_acc(&mut fg.weights[t], lc.input.row(v), &scaled, 1.0);
                for (b, &g) in fg.biases[t].iter_mut().zip(&scaled) {
                    *b += g;
                }
                vec_mat_t_into(&scaled, &fp.weights[t], &mut through_w);
                for ((o, &w), &g) in d_x.row_mut(v).iter_mut().zip(&through_w).zip(d_pre.row(v)) {
                    *o = w + (1.0 - c) * g;
                }
            }
            d_in = d_x;
        }
        dx = d_in;
    }

    let input = match (&params.input_projection, &mut grads.input_projection) {
        (Some(p), Some(gp)) => {
            *gp = h0.t_matmul(&dx);
            dx.matmul_t(p)
        }
        _ => dx,
    };
    Ok(Gradients { params: grads, input })
}

/// Runs a forward pass and back-propagates `upstream` through it.
pub fn pagnn_backward(
    h0: &Matrix,
    adj: &TypedAdjacency,
    config: &PagnnConfig,
    params: &PagnnParams,
    upstream: &Matrix,
) -> Result<Gradients, ModelError> {
    let cache = forward_cached(h0, adj, config, params)?;
    backward_from_cache(&cache, h0, adj, config, params, upstream)
}
