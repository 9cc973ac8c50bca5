//! Seeded attribute corruption: random information replacement (RIR) and
//! random information deletion (RID).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{round_half_up, GraphError, HeteroGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    /// Replace the attribute with a candidate drawn from a replacement pool.
    Rir,
    /// Delete a fraction of the attribute's whitespace-delimited tokens.
    Rid,
}

/// Replacement candidates keyed by dense node id.
pub type ReplacementPool = BTreeMap<usize, Vec<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Fraction of candidate nodes that are corrupted.
    pub ratio: f64,
    /// Fraction of tokens removed per corrupted node (RID only).
    pub deletion_fraction: f64,
    /// Replacement candidates (RIR only). Nodes absent from the pool are never
    /// selected for replacement.
    pub pool: ReplacementPool,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn rid(ratio: f64, deletion_fraction: f64, seed: u64) -> Self {
        Self {
            kind: CorruptionKind::Rid,
            ratio,
            deletion_fraction,
            pool: ReplacementPool::new(),
            seed,
        }
    }

    pub fn rir(ratio: f64, pool: ReplacementPool, seed: u64) -> Self {
        Self {
            kind: CorruptionKind::Rir,
            ratio,
            deletion_fraction: 0.0,
            pool,
            seed,
        }
    }

    fn validate(&self, graph: &HeteroGraph) -> Result<(), CorruptionError> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(CorruptionError::Ratio("r", self.ratio));
        }
        if !(0.0..=1.0).contains(&self.deletion_fraction) {
            return Err(CorruptionError::Ratio("deletion_fraction", self.deletion_fraction));
        }
        if let Some(&id) = self.pool.keys().find(|&&id| id >= graph.node_count()) {
            return Err(CorruptionError::UnknownPoolNode(id));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorruptionError {
    #[error("{0} must lie in [0, 1], got {1}")]
    Ratio(&'static str, f64),
    #[error("replacement pool has no candidates for selected node {0}")]
    MissingPoolEntry(usize),
    #[error("replacement pool references node {0} which is not in the graph")]
    UnknownPoolNode(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Applies a corruption to the node attributes. Topology, labels and splits are
/// untouched and the result is a pure function of `(graph, spec)`.
pub fn corrupt(graph: &HeteroGraph, spec: &CorruptionSpec) -> Result<HeteroGraph, CorruptionError> {
    spec.validate(graph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut candidates: Vec<usize> = match spec.kind {
        CorruptionKind::Rid => (0..graph.node_count()).collect(),
        CorruptionKind::Rir => spec.pool.keys().copied().collect(),
    };
    let selected_count = round_half_up(spec.ratio * candidates.len() as f64).min(candidates.len());
    candidates.shuffle(&mut rng);
    let mut selected = candidates[..selected_count].to_vec();
    // Per-node draws happen in id order so the output does not depend on the
    // shuffle's tail.
    selected.sort_unstable();

    let mut attributes = graph.attributes().to_vec();
    for v in selected {
        attributes[v] = match spec.kind {
            CorruptionKind::Rid => delete_tokens(&attributes[v], spec.deletion_fraction, &mut rng),
            CorruptionKind::Rir => {
                let pool = spec
                    .pool
                    .get(&v)
                    .filter(|c| !c.is_empty())
                    .ok_or(CorruptionError::MissingPoolEntry(v))?;
                pool[rng.gen_range(0..pool.len())].clone()
            }
        };
    }
    Ok(graph.with_attributes(attributes))
}

/// Removes `round_half_up(fraction * tokens)` whitespace-delimited tokens,
/// choosing which by a seeded shuffle. Survivors keep their order and are
/// joined by single spaces.
fn delete_tokens(text: &str, fraction: f64, rng: &mut ChaCha8Rng) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let remove = round_half_up(fraction * tokens.len() as f64).min(tokens.len());
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.shuffle(rng);
    let mut keep = vec![true; tokens.len()];
    for &i in &order[..remove] {
        keep[i] = false;
    }
    tokens
        .iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(*t))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Deserialize)]
struct PoolRecord {
    id: i64,
    candidates: Vec<String>,
}

/// Reads a replacement pool JSONL file, mapping original ids onto the graph's
/// dense ids.
pub fn load_pool(path: &Path, graph: &HeteroGraph) -> Result<ReplacementPool, GraphError> {
    let index: std::collections::HashMap<i64, usize> = graph
        .original_ids()
        .iter()
        .enumerate()
        .map(|(v, &id)| (id, v))
        .collect();
    let file = File::open(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pool = ReplacementPool::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let malformed = |message: String| GraphError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoolRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.candidates.is_empty() {
            return Err(malformed(format!("node {} has an empty candidate list", rec.id)));
        }
        let v = *index
            .get(&rec.id)
            .ok_or_else(|| malformed(format!("unknown node id {}", rec.id)))?;
        if pool.insert(v, rec.candidates).is_some() {
            return Err(malformed(format!("duplicate pool entry for node {}", rec.id)));
        }
    }
    Ok(pool)
}
