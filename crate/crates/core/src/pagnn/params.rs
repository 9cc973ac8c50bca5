use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{ModelError, PagnnConfig};
use crate::matrix::Matrix;

/// Per-type affine maps of the format alignment block.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-type maps of the content block: the node transform (`weights`,
/// `biases`) and the target-typed aggregation map (`agg_weights`).
#[derive(Debug, Clone, PartialEq)]
pub struct ContentParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub agg_weights: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub format: Option<FormatParams>,
    pub content: Option<ContentParams>,
    pub regular: Matrix,
}

/// Every learnable tensor of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct PagnnParams {
    pub input_projection: Option<Matrix>,
    pub layers: Vec<LayerParams>,
    pub classifier: Matrix,
    pub classifier_bias: Vec<f64>,
}

/// Draws Glorot-uniform matrices. Each tensor gets its own ChaCha stream, so a
/// tensor's values depend only on the seed and its position in declaration
/// order.
struct Initializer {
    seed: u64,
    stream: u64,
}

impl Initializer {
    fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        self.stream += 1;
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn zeros(&mut self, len: usize) -> Vec<f64> {
        self.stream += 1;
        vec![0.0; len]
    }
}

/// Glorot-uniform weights and zero biases, deterministic in `config.seed`.
pub fn init_params(config: &PagnnConfig) -> Result<PagnnParams, ModelError> {
    config.validate()?;
    let d = config.hidden_dim;
    let mut init = Initializer {
        seed: config.seed,
        stream: 0,
    };
    let input_projection = config
        .use_input_projection
        .then(|| init.matrix(config.input_dim, d));
    let mut layers = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let format = config.has_format_block(l).then(|| FormatParams {
            weights: (0..config.num_format_types).map(|_| init.matrix(d, d)).collect(),
            biases: (0..config.num_format_types).map(|_| init.zeros(d)).collect(),
        });
        let content = config.has_content_block(l).then(|| ContentParams {
            weights: (0..config.num_content_types).map(|_| init.matrix(d, d)).collect(),
            biases: (0..config.num_content_types).map(|_| init.zeros(d)).collect(),
            agg_weights: (0..config.num_content_types).map(|_| init.matrix(d, d)).collect(),
        });
        let regular = init.matrix(d, d);
        layers.push(LayerParams {
            format,
            content,
            regular,
        });
    }
    let classifier = init.matrix(d, config.num_classes);
    let classifier_bias = init.zeros(config.num_classes);
    Ok(PagnnParams {
        input_projection,
        layers,
        classifier,
        classifier_bias,
    })
}

impl PagnnParams {
    /// All tensors as flat slices, in declaration order: input projection,
    /// then per layer format weights, format biases, content weights, content
    /// biases, aggregation weights, regular weight; then classifier weight and
    /// bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(p) = &self.input_projection {
            out.push(p.as_slice());
        }
        for layer in &self.layers {
            if let Some(f) = &layer.format {
                out.extend(f.weights.iter().map(Matrix::as_slice));
                out.extend(f.biases.iter().map(Vec::as_slice));
            }
            if let Some(c) = &layer.content {
                out.extend(c.weights.iter().map(Matrix::as_slice));
                out.extend(c.biases.iter().map(Vec::as_slice));
                out.extend(c.agg_weights.iter().map(Matrix::as_slice));
            }
            out.push(layer.regular.as_slice());
        }
        out.push(self.classifier.as_slice());
        out.push(&self.classifier_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(p) = &mut self.input_projection {
            out.push(p.as_mut_slice());
        }
        for layer in &mut self.layers {
            if let Some(f) = &mut layer.format {
                out.extend(f.weights.iter_mut().map(Matrix::as_mut_slice));
                out.extend(f.biases.iter_mut().map(Vec::as_mut_slice));
            }
            if let Some(c) = &mut layer.content {
                out.extend(c.weights.iter_mut().map(Matrix::as_mut_slice));
                out.extend(c.biases.iter_mut().map(Vec::as_mut_slice));
                out.extend(c.agg_weights.iter_mut().map(Matrix::as_mut_slice));
            }
            out.push(layer.regular.as_mut_slice());
        }
        out.push(self.classifier.as_mut_slice());
        out.push(&mut self.classifier_bias);
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// A zero-filled copy with identical shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Copies values from a flat buffer in declaration order.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<(), ModelError> {
        if values.len() != self.scalar_count() {
            return Err(ModelError::Shape(format!(
                "expected {} parameters, got {}",
                self.scalar_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Checks that tensor shapes match `config`.
    pub fn check_shapes(&self, config: &PagnnConfig) -> Result<(), ModelError> {
        let expected = init_shape_template(config);
        let ok = self.layers.len() == expected.layers.len()
            && self.input_projection.as_ref().map(Matrix::shape) == expected.input_projection.as_ref().map(Matrix::shape)
            && self.classifier.shape() == expected.classifier.shape()
            && self.classifier_bias.len() == expected.classifier_bias.len()
            && self.layers.iter().zip(&expected.layers).all(|(a, b)| {
                a.regular.shape() == b.regular.shape()
                    && match (&a.format, &b.format) {
                        (None, None) => true,
                        (Some(x), Some(y)) => {
                            x.weights.len() == y.weights.len()
                                && x.biases.len() == y.biases.len()
                                && x.weights.iter().zip(&y.weights).all(|(p, q)| p.shape() == q.shape())
                                && x.biases.iter().zip(&y.biases).all(|(p, q)| p.len() == q.len())
                        }
                        _ => false,
                    }
                    && match (&a.content, &b.content) {
                        (None, None) => true,
                        (Some(x), Some(y)) => {
                            x.weights.len() == y.weights.len()
                                && x.agg_weights.len() == y.agg_weights.len()
                                && x.biases.len() == y.biases.len()
                                && x.weights.iter().zip(&y.weights).all(|(p, q)| p.shape() == q.shape())
                                && x.agg_weights.iter().zip(&y.agg_weights).all(|(p, q)| p.shape() == q.shape())
                                && x.biases.iter().zip(&y.biases).all(|(p, q)| p.len() == q.len())
                        }
                        _ => false,
                    }
            });
        if ok {
            Ok(())
        } else {
            Err(ModelError::Shape("parameter shapes do not match the configuration".into()))
        }
    }
}

/// Zero parameters with the shapes implied by `config` (no validation).
pub(crate) fn init_shape_template(config: &PagnnConfig) -> PagnnParams {
    let d = config.hidden_dim;
    let zeros = |r, c| Matrix::zeros(r, c);
    PagnnParams {
        input_projection: config.use_input_projection.then(|| zeros(config.input_dim, d)),
        layers: (0..config.layers)
            .map(|l| LayerParams {
                format: config.has_format_block(l).then(|| FormatParams {
                    weights: vec![zeros(d, d); config.num_format_types],
                    biases: vec![vec![0.0; d]; config.num_format_types],
                }),
                content: config.has_content_block(l).then(|| ContentParams {
                    weights: vec![zeros(d, d); config.num_content_types],
                    biases: vec![vec![0.0; d]; config.num_content_types],
                    agg_weights: vec![zeros(d, d); config.num_content_types],
                }),
                regular: zeros(d, d),
            })
            .collect(),
        classifier: zeros(d, config.num_classes),
        classifier_bias: vec![0.0; config.num_classes],
    }
}
