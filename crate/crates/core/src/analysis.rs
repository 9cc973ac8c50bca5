//! Over-smoothing diagnostics: simplified propagation models, numerical
//! linear-dependence checks, and per-layer type-separation profiles.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::{cosine, norm, Matrix};
use crate::pagnn::{forward_cached, ModelError, PagnnConfig, PagnnParams, TypedAdjacency};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("representations blew up at layer {layer} (max |h| = {magnitude:e})")]
    BlowUp { layer: usize, magnitude: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SimplifiedVariant {
    /// `h_v <- h_v + mean_{u in N(v)} h_u W(l)`
    PlainG,
    /// `h_v <- h_v + mean_{u in N(v)} (h_u W[t(v)] + B[t(v)])`
    TypedGTilde { type_index: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimplifiedWeights {
    /// `W = s * I` for every layer and type. Biases stay random.
    ScaledIdentity(f64),
    /// Entries uniform in `[-1, 1] / sqrt(dim)`; fresh per layer for the
    /// plain model, fresh per type for the typed one.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedModelSpec {
    pub variant: SimplifiedVariant,
    pub layers: usize,
    pub weights: SimplifiedWeights,
    pub weight_seed: u64,
    pub normalize_each_layer: bool,
    /// Largest tolerated magnitude when normalization is off.
    pub blowup_threshold: f64,
}

impl SimplifiedModelSpec {
    pub fn plain(layers: usize, weights: SimplifiedWeights, seed: u64) -> Self {
        Self {
            variant: SimplifiedVariant::PlainG,
            layers,
            weights,
            weight_seed: seed,
            normalize_each_layer: true,
            blowup_threshold: 1e150,
        }
    }

    pub fn typed(layers: usize, type_index: Vec<usize>, weights: SimplifiedWeights, seed: u64) -> Self {
        Self {
            variant: SimplifiedVariant::TypedGTilde { type_index },
            ..Self::plain(layers, weights, seed)
        }
    }
}

fn normalize_rows(h: &mut Matrix) {
    for v in 0..h.rows() {
        let row = h.row_mut(v);
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

fn draw_weight(weights: SimplifiedWeights, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    match weights {
        SimplifiedWeights::ScaledIdentity(s) => {
            let mut w = Matrix::identity(dim);
            w.scale(s);
            w
        }
        SimplifiedWeights::Random => {
            let bound = 1.0 / (dim as f64).sqrt();
            let data = (0..dim * dim).map(|_| rng.gen_range(-bound..=bound)).collect();
            Matrix::from_vec(dim, dim, data)
        }
    }
}

/// Runs the simplified propagation model for `spec.layers` layers.
pub fn simplified_iterate(
    neighbors: &[Vec<usize>],
    features: &Matrix,
    spec: &SimplifiedModelSpec,
) -> Result<Matrix, AnalysisError> {
    let n = neighbors.len();
    let dim = features.cols();
    if features.rows() != n {
        return Err(AnalysisError::Spec(format!("{} feature rows for {n} nodes", features.rows())));
    }
    if !features.is_finite() {
        return Err(AnalysisError::Spec("features must be finite".into()));
    }
    if neighbors.iter().flatten().any(|&u| u >= n) {
        return Err(AnalysisError::Spec("neighbor id out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.weight_seed);
    let typed = match &spec.variant {
        SimplifiedVariant::PlainG => None,
        SimplifiedVariant::TypedGTilde { type_index } => {
            if type_index.len() != n {
                return Err(AnalysisError::Spec("typed variant needs a type index for every node".into()));
            }
            let num_types = type_index.iter().max().map_or(0, |m| m + 1);
            let w: Vec<Matrix> = (0..num_types).map(|_| draw_weight(spec.weights, dim, &mut rng)).collect();
            let b: Vec<Vec<f64>> = (0..num_types)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect();
            Some((type_index, w, b))
        }
    };

    let mut h = features.clone();
    for layer in 1..=spec.layers {
        let mut next = h.clone();
        let plain_w = match typed {
            None => Some(draw_weight(spec.weights, dim, &mut rng)),
            Some(_) => None,
        };
        for v in 0..n {
            let nbrs = &neighbors[v];
            if nbrs.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for &u in nbrs {
                for (m, &x) in mean.iter_mut().zip(h.row(u)) {
                    *m += x;
                }
            }
            let deg = nbrs.len() as f64;
            mean.iter_mut().for_each(|m| *m /= deg);
            let mut delta = vec![0.0; dim];
            match (&typed, &plain_w) {
                (Some((types, w, b)), _) => {
                    let t = types[v];
                    crate::matrix::vec_mat_into(&mean, &w[t], &mut delta);
                    for (d, &bias) in delta.iter_mut().zip(&b[t]) {
                        *d += bias;
                    }
                }
                (None, Some(w)) => crate::matrix::vec_mat_into(&mean, w, &mut delta),
                (None, None) => unreachable!(),
            }
            for (x, d) in next.row_mut(v).iter_mut().zip(delta) {
                *x += d;
            }
        }
        if spec.normalize_each_layer {
            normalize_rows(&mut next);
        } else {
            let magnitude = next.max_abs();
            if !magnitude.is_finite() || magnitude > spec.blowup_threshold {
                return Err(AnalysisError::BlowUp { layer, magnitude });
            }
        }
        h = next;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDependenceReport {
    pub dependent: bool,
    pub numerical_rank: usize,
    pub max_abs_cosine: f64,
    pub singular_values: Vec<f64>,
}

/// Rows are rescaled to unit norm, then the rank counts singular values
/// above `tol * sigma_max`. The rows are dependent when the rank is below
/// the row count.
pub fn linear_dependence_check(vectors: &Matrix, tol: f64) -> LinearDependenceReport {
    let mut rows = vectors.clone();
    normalize_rows(&mut rows);
    let m = DMatrix::from_row_slice(rows.rows(), rows.cols(), rows.as_slice());
    let mut singular_values: Vec<f64> = if rows.rows() == 0 || rows.cols() == 0 {
        Vec::new()
    } else {
        m.singular_values().iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let numerical_rank = if sigma_max > 0.0 {
        singular_values.iter().filter(|&&s| s > tol * sigma_max).count()
    } else {
        0
    };
    let mut max_abs_cosine: f64 = 0.0;
    for i in 0..vectors.rows() {
        for j in i + 1..vectors.rows() {
            max_abs_cosine = max_abs_cosine.max(cosine(vectors.row(i), vectors.row(j)).abs());
        }
    }
    LinearDependenceReport {
        dependent: numerical_rank < vectors.rows(),
        numerical_rank,
        max_abs_cosine,
        singular_values,
    }
}

/// Produces node representations at layer 0 (input) through the last layer.
pub trait LayerwiseRunner {
    fn layer_representations(&self) -> Result<Vec<Matrix>, AnalysisError>;
}

/// Runs PAGNN once and exposes the post-layer representations. Layer 0 is
/// the (projected) input.
pub struct PagnnRunner<'a> {
    pub features: &'a Matrix,
    pub adjacency: &'a TypedAdjacency,
    pub config: &'a PagnnConfig,
    pub params: &'a PagnnParams,
}

impl LayerwiseRunner for PagnnRunner<'_> {
    fn layer_representations(&self) -> Result<Vec<Matrix>, AnalysisError> {
        let cache = forward_cached(self.features, self.adjacency, self.config, self.params)?;
        let mut out = vec![cache.projected_input().clone()];
        out.extend(cache.layer_outputs().cloned());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversmoothingProfile {
    /// `values[l]`: mean over types of cosine(type mean, global mean).
    pub values: Vec<f64>,
    /// `per_type[l][t]`, `None` for a type with no nodes.
    pub per_type: Vec<Vec<Option<f64>>>,
    pub layer_count: usize,
    pub type_count: usize,
}

/// Mean over non-empty types of cosine(type mean, global mean) for one
/// representation matrix.
pub fn type_separation(h: &Matrix, types: &[usize], type_count: usize) -> (f64, Vec<Option<f64>>) {
    let dim = h.cols();
    let mut global = vec![0.0; dim];
    let mut sums = vec![vec![0.0; dim]; type_count];
    let mut counts = vec![0usize; type_count];
    for v in 0..h.rows() {
        let t = types[v];
        counts[t] += 1;
        for ((g, s), &x) in global.iter_mut().zip(sums[t].iter_mut()).zip(h.row(v)) {
            *g += x;
            *s += x;
        }
    }
    if h.rows() > 0 {
        global.iter_mut().for_each(|g| *g /= h.rows() as f64);
    }
    let per_type: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            (c > 0).then(|| {
                let mean: Vec<f64> = s.iter().map(|x| x / c as f64).collect();
                cosine(&mean, &global)
            })
        })
        .collect();
    let present: Vec<f64> = per_type.iter().flatten().copied().collect();
    let value = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    (value, per_type)
}

/// Profile over layers `0..=max_layer`, grouping nodes by content type.
pub fn oversmoothing_profile(
    runner: &dyn LayerwiseRunner,
    content_types: &[usize],
    type_count: usize,
    max_layer: usize,
) -> Result<OversmoothingProfile, AnalysisError> {
    if content_types.iter().any(|&t| t >= type_count) {
        return Err(AnalysisError::Spec("content type index out of range".into()));
    }
    let reps = runner.layer_representations()?;
    if max_layer >= reps.len() {
        return Err(AnalysisError::Spec(format!(
            "max layer {max_layer} exceeds the model depth {}",
            reps.len() - 1
        )));
    }
    let mut values = Vec::with_capacity(max_layer + 1);
    let mut per_type = Vec::with_capacity(max_layer + 1);
    for h in &reps[..=max_layer] {
        if h.rows() != content_types.len() {
            return Err(AnalysisError::Spec("one content type per node is required".into()));
        }
        let (v, p) = type_separation(h, content_types, type_count);
        values.push(v);
        per_type.push(p);
    }
    Ok(OversmoothingProfile {
        values,
        per_type,
        layer_count: max_layer + 1,
        type_count,
    })
}

/// `layer,value` rows.
pub fn write_profile_csv(profile: &OversmoothingProfile, path: &Path) -> Result<(), AnalysisError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "layer,value")?;
    for (l, v) in profile.values.iter().enumerate() {
        writeln!(f, "{l},{v}")?;
    }
    f.flush()?;
    Ok(())
}

/// `layer,<name1>,<name2>,...` rows for several profiles side by side.
pub fn write_merged_csv(profiles: &[(&str, &OversmoothingProfile)], path: &Path) -> Result<(), AnalysisError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_table(&mut f, profiles, ",", "")?;
    f.flush()?;
    Ok(())
}

/// Whitespace-separated columns with a `#` header, loadable by gnuplot.
pub fn write_gnuplot_data(profiles: &[(&str, &OversmoothingProfile)], path: &Path) -> Result<(), AnalysisError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_table(&mut f, profiles, " ", "# ")?;
    f.flush()?;
    Ok(())
}

fn write_table(
    f: &mut impl Write,
    profiles: &[(&str, &OversmoothingProfile)],
    sep: &str,
    header_prefix: &str,
) -> std::io::Result<()> {
    let names: Vec<&str> = profiles.iter().map(|(n, _)| *n).collect();
    writeln!(f, "{header_prefix}layer{sep}{}", names.join(sep))?;
    let rows = profiles.iter().map(|(_, p)| p.values.len()).max().unwrap_or(0);
    for l in 0..rows {
        let cells: Vec<String> = profiles
            .iter()
            .map(|(_, p)| p.values.get(l).map(|v| v.to_string()).unwrap_or_else(|| "nan".into()))
            .collect();
        writeln!(f, "{l}{sep}{}", cells.join(sep))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_layers_is_identity() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0]]);
        let nbrs = vec![vec![1], vec![0]];
        let spec = SimplifiedModelSpec::plain(0, SimplifiedWeights::Random, 1);
        assert_eq!(simplified_iterate(&nbrs, &x, &spec).unwrap(), x);
    }

    #[test]
    fn blow_up_reports_layer() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let nbrs = vec![vec![1], vec![0]];
        let mut spec = SimplifiedModelSpec::plain(100, SimplifiedWeights::ScaledIdentity(1.0), 0);
        spec.normalize_each_layer = false;
        spec.blowup_threshold = 1000.0;
        // Doubles each layer: 2^10 = 1024 > 1000.
        match simplified_iterate(&nbrs, &x, &spec) {
            Err(AnalysisError::BlowUp { layer, .. }) => assert_eq!(layer, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn typed_requires_all_indices() {
        let x = Matrix::zeros(3, 2);
        let spec = SimplifiedModelSpec::typed(1, vec![0, 1], SimplifiedWeights::Random, 0);
        assert!(simplified_iterate(&[vec![], vec![], vec![]], &x, &spec).is_err());
    }

    #[test]
    fn dependence_examples() {
        let same = linear_dependence_check(&Matrix::from_rows(&[vec![2.0, 1.0], vec![2.0, 1.0]]), 1e-6);
        assert!(same.dependent);
        assert_eq!(same.numerical_rank, 1);
        let basis = linear_dependence_check(&Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 1e-6);
        assert!(!basis.dependent);
        assert_eq!(basis.numerical_rank, 2);
        assert_eq!(basis.max_abs_cosine, 0.0);
        let near = linear_dependence_check(&Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1e-9]]), 1e-6);
        assert!(near.dependent);
        assert_eq!(near.numerical_rank, 1);
    }

    #[test]
    fn identical_features_profile_one() {
        struct Fixed(Matrix);
        impl LayerwiseRunner for Fixed {
            fn layer_representations(&self) -> Result<Vec<Matrix>, AnalysisError> {
                Ok(vec![self.0.clone()])
            }
        }
        let h = Matrix::from_rows(&vec![vec![0.5, -1.0, 2.0]; 6]);
        let p = oversmoothing_profile(&Fixed(h), &[0, 1, 2, 0, 1, 2], 3, 0).unwrap();
        assert!((p.values[0] - 1.0).abs() < 1e-12);
    }
}
