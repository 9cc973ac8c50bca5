//! Test oracles shared by several integration targets.
#![allow(dead_code)]

use ghgrl_core::matrix::Matrix;
use ghgrl_core::pagnn::{pagnn_backward, pagnn_forward, Activation, PagnnConfig, PagnnParams, TypedAdjacency};
use ghgrl_core::synthetic::{random_connected_edges, random_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random graph with random types and confidences.
pub fn random_setup(n: usize, config: &PagnnConfig, seed: u64) -> (Matrix, TypedAdjacency) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_connected_edges(n, 0.3, seed);
    let fmt = (0..n).map(|_| rng.gen_range(0..config.num_format_types)).collect();
    let cont = (0..n).map(|_| rng.gen_range(0..config.num_content_types)).collect();
    let cf = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let cc = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let adj = TypedAdjacency::from_edges(n, &edges, fmt, cf, cont, cc).unwrap();
    let h0 = random_matrix(n, config.input_dim, 1.0, seed ^ 0x5eed);
    (h0, adj)
}

pub fn small_config(layers: usize, format_layers: usize, content_layers: usize, seed: u64) -> PagnnConfig {
    PagnnConfig {
        layers,
        format_layers,
        content_layers,
        input_dim: 5,
        hidden_dim: 5,
        alpha: 0.7,
        num_format_types: 2,
        num_content_types: 2,
        num_classes: 3,
        activation: Activation::Relu,
        use_input_projection: true,
        confidence_floor: 0.0,
        seed,
    }
}

/// Biases start at zero, which leaves many pre-activations exactly on a
/// kink. Jitter everything so finite differences see smooth pieces.
pub fn jitter(params: &mut PagnnParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = params.to_flat().iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect();
    params.load_flat(&flat).unwrap();
}

pub struct FdResult {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central finite differences of `sum(logits * upstream)` for every
/// parameter entry, compared with the analytic gradient.
pub fn finite_difference_check(
    h0: &Matrix,
    adj: &TypedAdjacency,
    config: &PagnnConfig,
    params: &PagnnParams,
    upstream: &Matrix,
    step: f64,
) -> FdResult {
    let objective = |p: &PagnnParams| -> f64 {
        let logits = pagnn_forward(h0, adj, config, p).unwrap();
        logits.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum()
    };
    let analytic = pagnn_backward(h0, adj, config, params, upstream).unwrap().params.to_flat();
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut result = FdResult {
        checked: 0,
        max_rel_err: 0.0,
        worst_index: 0,
    };
    for i in 0..base.len() {
        let mut shifted = base.clone();
        shifted[i] = base[i] + step;
        probe.load_flat(&shifted).unwrap();
        let plus = objective(&probe);
        shifted[i] = base[i] - step;
        probe.load_flat(&shifted).unwrap();
        let minus = objective(&probe);
        let numeric = (plus - minus) / (2.0 * step);
        let e = rel_err(analytic[i], numeric);
        if e > result.max_rel_err {
            result.max_rel_err = e;
            result.worst_index = i;
        }
        result.checked += 1;
    }
    result
}

/// Synthetic graph, mock annotations and hashed features with the model
/// settings used for the end-to-end checks.
pub fn mock_pipeline(seed: u64) -> (ghgrl_core::HeteroGraph, Vec<ghgrl_core::NodeAnnotation>, ghgrl_core::FeatureMatrix, PagnnConfig) {
    use ghgrl_core::llm::embed::{build_feature_matrix, HashEmbedder};
    use ghgrl_core::llm::*;
    use ghgrl_core::synthetic::{synthetic_graph, SyntheticConfig};

    let graph = synthetic_graph(&SyntheticConfig {
        train_ratio: 0.4,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let settings = LlmSettings {
        retry_delay: std::time::Duration::ZERO,
        ..LlmSettings::default()
    };
    let templates = PromptTemplates::default();
    let sample = sample_attributes(&graph, 4000, seed).unwrap();
    let schema = generate_type_schema(&graph, &sample, 2, 1, &templates, &MockLlm, &settings).unwrap();
    let (annotations, _) = annotate_all(&graph, &schema, &templates, &MockLlm, None, &settings, 4).unwrap();
    let features = build_feature_matrix(&annotations, &HashEmbedder::new(256), 64).unwrap();
    let config = PagnnConfig {
        layers: 2,
        format_layers: 1,
        content_layers: 2,
        input_dim: 256,
        hidden_dim: 64,
        alpha: 1.0,
        num_format_types: 2,
        num_content_types: 1,
        num_classes: graph.num_classes(),
        activation: Activation::Relu,
        use_input_projection: true,
        confidence_floor: 0.0,
        seed,
    };
    (graph, annotations, features, config)
}
