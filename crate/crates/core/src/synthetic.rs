//! Seeded synthetic datasets for tests, benchmarks, and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{GraphError, HeteroGraph};
use crate::matrix::Matrix;
use crate::pagnn::{ModelError, TypedAdjacency};

const CLASS_WORDS: [&[&str]; 3] = [
    &["galaxy", "orbit", "comet", "nebula", "rocket", "asteroid", "lunar", "stellar"],
    &["violin", "sonata", "chorus", "melody", "tenor", "rhythm", "opera", "piano"],
    &["harvest", "tractor", "orchard", "barley", "pasture", "irrigation", "dairy", "silo"],
];

const FILLER: &[&str] = &[
    "the", "a", "new", "study", "of", "with", "report", "about", "review", "notes", "on", "and", "guide", "from",
    "recent", "early", "story", "for", "local", "series",
];

fn class_vocabulary(class: usize) -> Vec<String> {
    match CLASS_WORDS.get(class) {
        Some(words) => words.iter().map(|w| w.to_string()).collect(),
        None => (0..8).map(|j| format!("topic{class}term{j}")).collect(),
    }
}

/// Knobs for [`synthetic_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub nodes: usize,
    pub classes: usize,
    /// Share of nodes whose attribute is a bare numeric identifier. These
    /// nodes are unlabeled.
    pub numeric_fraction: f64,
    pub keywords_per_node: usize,
    /// Keywords drawn from a random other class.
    pub noise_keywords: usize,
    pub filler_words: usize,
    /// Edge draws per node.
    pub edges_per_node: usize,
    /// Probability that an edge draw stays within the node's class.
    pub homophily: f64,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            nodes: 300,
            classes: 3,
            numeric_fraction: 0.2,
            keywords_per_node: 3,
            noise_keywords: 1,
            filler_words: 5,
            edges_per_node: 3,
            homophily: 0.8,
            train_ratio: 0.2,
            val_ratio: 0.2,
            seed: 0,
        }
    }
}

/// Labeled text graph with class keywords planted in the attributes, two
/// attribute formats (numeric ids and short phrases), homophilous edges,
/// and stratified splits.
pub fn synthetic_graph(config: &SyntheticConfig) -> Result<HeteroGraph, GraphError> {
    if config.classes == 0 || config.nodes < config.classes {
        return Err(GraphError::Invalid("need at least one node per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let hidden: Vec<usize> = (0..n).map(|v| v % config.classes).collect();
    let numeric_count = (config.numeric_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut numeric = vec![false; n];
    for &v in order.iter().take(numeric_count) {
        numeric[v] = true;
    }
    let vocab: Vec<Vec<String>> = (0..config.classes).map(class_vocabulary).collect();

    let mut attributes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        if numeric[v] {
            attributes.push(format!("{}", rng.gen_range(100_000..1_000_000u32)));
            labels.push(None);
            continue;
        }
        let class = hidden[v];
        let mut words: Vec<String> = (0..config.keywords_per_node)
            .map(|_| vocab[class].choose(&mut rng).unwrap().clone())
            .collect();
        for _ in 0..config.noise_keywords {
            if config.classes > 1 {
                let other = (class + rng.gen_range(1..config.classes)) % config.classes;
                words.push(vocab[other].choose(&mut rng).unwrap().clone());
            }
        }
        for _ in 0..config.filler_words {
            words.push(FILLER.choose(&mut rng).unwrap().to_string());
        }
        words.shuffle(&mut rng);
        attributes.push(words.join(" "));
        labels.push(Some(class));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); config.classes];
    for v in 0..n {
        by_class[hidden[v]].push(v);
    }
    let mut edges = Vec::new();
    for v in 0..n {
        for _ in 0..config.edges_per_node {
            let u = if rng.gen_bool(config.homophily.clamp(0.0, 1.0)) {
                *by_class[hidden[v]].choose(&mut rng).unwrap()
            } else {
                rng.gen_range(0..n)
            };
            if u != v {
                edges.push((v.min(u), v.max(u)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let graph = HeteroGraph::new(attributes, edges, Some(labels), None)?.with_num_classes(config.classes)?;
    let splits = graph.stratified_split(config.train_ratio, config.val_ratio, config.seed)?;
    graph.with_splits(splits)
}

/// Connected random graph: a random spanning tree plus each remaining pair
/// independently with probability `p`. Edges are `(min, max)` and sorted.
pub fn random_connected_edges(n: usize, p: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        let child = order[i];
        edges.push((parent.min(child), parent.max(child)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Dense matrix with entries uniform in `[-scale, scale]`.
pub fn random_matrix(rows: usize, cols: usize, scale: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Typed graph where every content type has its own feature prototype.
#[derive(Debug, Clone)]
pub struct TypedFixture {
    pub adjacency: TypedAdjacency,
    pub features: Matrix,
    pub num_format_types: usize,
    pub num_content_types: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedFixtureConfig {
    pub nodes: usize,
    pub content_types: usize,
    pub format_types: usize,
    pub dim: usize,
    pub edges_per_node: usize,
    /// Probability that an edge draw picks a node of a different type.
    pub cross_type: f64,
    pub noise: f64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for TypedFixtureConfig {
    fn default() -> Self {
        Self {
            nodes: 120,
            content_types: 4,
            format_types: 2,
            dim: 16,
            edges_per_node: 4,
            cross_type: 0.3,
            noise: 0.3,
            confidence: 0.9,
            seed: 0,
        }
    }
}

pub fn typed_fixture(config: &TypedFixtureConfig) -> Result<TypedFixture, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let types: Vec<usize> = (0..n).map(|v| v % config.content_types).collect();
    let prototypes: Vec<Vec<f64>> = (0..config.content_types)
        .map(|_| (0..config.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let mut features = Matrix::zeros(n, config.dim);
    for v in 0..n {
        for (x, &p) in features.row_mut(v).iter_mut().zip(&prototypes[types[v]]) {
            *x = p + config.noise * rng.gen_range(-1.0..=1.0);
        }
    }
    let mut edges = Vec::new();
    for v in 0..n {
        for _ in 0..config.edges_per_node {
            let cross = config.content_types > 1 && rng.gen_bool(config.cross_type);
            let u = loop {
                let u = rng.gen_range(0..n);
                if u != v && (types[u] != types[v]) == cross {
                    break u;
                }
            };
            edges.push((v, u));
        }
    }
    let format_index = types.iter().map(|t| t % config.format_types).collect();
    TypedAdjacency::from_edges(
        n,
        &edges,
        format_index,
        vec![config.confidence; n],
        types,
        vec![config.confidence; n],
    )
    .map(|adjacency| TypedFixture {
        adjacency,
        features,
        num_format_types: config.format_types,
        num_content_types: config.content_types,
    })
}
