//! Heterogeneous graph data model and dataset loaders.
//!
//! Nodes carry a raw text attribute of arbitrary format. Node and edge types are
//! never read from the input; they are inferred later by the annotation stage.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate node id {id} ({path}:{line})")]
    DuplicateNode { id: i64, path: PathBuf, line: usize },
    #[error("edge {src},{dst} references unknown node id {missing} ({path}:{line})")]
    DanglingEdge {
        src: i64,
        dst: i64,
        missing: i64,
        path: PathBuf,
        line: usize,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// Split membership of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// A graph whose nodes carry free-form text attributes.
///
/// Node ids are dense `0..node_count`; `original_ids` keeps the ids found in
/// the source file so outputs can be written back in the same id space.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    attributes: Vec<String>,
    original_ids: Vec<i64>,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<Option<usize>>>,
    splits: Option<Vec<Split>>,
    num_classes: usize,
}

impl HeteroGraph {
    /// Builds and validates a graph. Edges are undirected; `(a, b)` and `(b, a)`
    /// count as the same edge.
    pub fn new(
        attributes: Vec<String>,
        edges: Vec<(usize, usize)>,
        labels: Option<Vec<Option<usize>>>,
        splits: Option<Vec<Split>>,
    ) -> Result<Self, GraphError> {
        let n = attributes.len();
        let original_ids = (0..n as i64).collect();
        let num_classes = labels
            .as_ref()
            .and_then(|l| l.iter().flatten().max().map(|m| m + 1))
            .unwrap_or(0);
        let g = Self {
            attributes,
            original_ids,
            edges,
            labels,
            splits,
            num_classes,
        };
        g.validate(false)?;
        Ok(g)
    }

    pub fn with_original_ids(mut self, ids: Vec<i64>) -> Result<Self, GraphError> {
        if ids.len() != self.attributes.len() {
            return Err(GraphError::Invalid("original id count mismatch".into()));
        }
        let unique: HashSet<_> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(GraphError::Invalid("original ids are not unique".into()));
        }
        self.original_ids = ids;
        Ok(self)
    }

    /// Overrides the class count (must cover every label present).
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self, GraphError> {
        self.num_classes = num_classes;
        self.validate(false)?;
        Ok(self)
    }

    fn validate(&self, allow_self_loops: bool) -> Result<(), GraphError> {
        let n = self.attributes.len();
        if self.original_ids.len() != n {
            return Err(GraphError::Invalid("attribute/id length mismatch".into()));
        }
        let mut seen = HashSet::with_capacity(self.edges.len());
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(GraphError::Invalid(format!(
                    "edge ({a},{b}) out of range for {n} nodes"
                )));
            }
            if a == b && !allow_self_loops {
                return Err(GraphError::Invalid(format!("self-loop on node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::Invalid(format!("duplicate edge ({a},{b})")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(GraphError::Invalid("label length mismatch".into()));
            }
            if let Some(bad) = labels.iter().flatten().find(|&&l| l >= self.num_classes) {
                return Err(GraphError::Invalid(format!(
                    "label {bad} >= num_classes {}",
                    self.num_classes
                )));
            }
        }
        if let Some(splits) = &self.splits {
            if splits.len() != n {
                return Err(GraphError::Invalid("split length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute(&self, v: usize) -> &str {
        &self.attributes[v]
    }

    pub fn original_ids(&self) -> &[i64] {
        &self.original_ids
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[Option<usize>]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels.as_ref().and_then(|l| l[v])
    }

    pub fn splits(&self) -> Option<&[Split]> {
        self.splits.as_deref()
    }

    pub fn split(&self, v: usize) -> Split {
        self.splits.as_ref().map_or(Split::None, |s| s[v])
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Replaces the attribute sequence, keeping topology, labels and splits.
    pub(crate) fn with_attributes(&self, attributes: Vec<String>) -> Self {
        assert_eq!(attributes.len(), self.attributes.len());
        Self {
            attributes,
            ..self.clone()
        }
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self, GraphError> {
        self.splits = Some(splits);
        self.validate(false)?;
        Ok(self)
    }

    /// Sorted, symmetric neighbor lists.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            if a != b {
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Node ids in the given split that carry a label.
    pub fn labeled_in(&self, split: Split) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&v| self.split(v) == split && self.label(v).is_some())
            .collect()
    }

    /// Assigns seeded, class-stratified train/val/test splits to labeled nodes.
    /// Unlabeled nodes get [`Split::None`].
    pub fn stratified_split(
        &self,
        train_ratio: f64,
        val_ratio: f64,
        seed: u64,
    ) -> Result<Vec<Split>, GraphError> {
        if !(0.0..=1.0).contains(&train_ratio)
            || !(0.0..=1.0).contains(&val_ratio)
            || train_ratio + val_ratio > 1.0
        {
            return Err(GraphError::Invalid(format!(
                "invalid split ratios train={train_ratio} val={val_ratio}"
            )));
        }
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| GraphError::Invalid("graph has no labels to split".into()))?;
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                by_class.entry(*c).or_default().push(v);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![Split::None; self.node_count()];
        for members in by_class.values_mut() {
            members.shuffle(&mut rng);
            let n = members.len() as f64;
            let n_train = round_half_up(train_ratio * n);
            let n_val = round_half_up(val_ratio * n).min(members.len() - n_train);
            for (i, &v) in members.iter().enumerate() {
                out[v] = if i < n_train {
                    Split::Train
                } else if i < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                };
            }
        }
        Ok(out)
    }
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

#[derive(Debug, Deserialize, Serialize)]
struct NodeRecord {
    id: i64,
    attribute: String,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    split: Option<Split>,
}

fn open(path: &Path) -> Result<BufReader<File>, GraphError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Loads a graph from a nodes JSONL file and an edges CSV file (`src,dst`).
///
/// Node ids are re-indexed densely in file order.
pub fn load_dataset(nodes_path: &Path, edges_path: &Path) -> Result<HeteroGraph, GraphError> {
    let mut attributes = Vec::new();
    let mut original_ids = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    let mut index: HashMap<i64, usize> = HashMap::new();

    for (i, line) in open(nodes_path)?.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| GraphError::Io {
            path: nodes_path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeRecord = serde_json::from_str(&line).map_err(|e| GraphError::Malformed {
            path: nodes_path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if index.insert(rec.id, attributes.len()).is_some() {
            return Err(GraphError::DuplicateNode {
                id: rec.id,
                path: nodes_path.to_path_buf(),
                line: line_no,
            });
        }
        attributes.push(rec.attribute);
        original_ids.push(rec.id);
        labels.push(rec.label);
        splits.push(rec.split.unwrap_or(Split::None));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(edges_path)?);
    let headers = reader.headers().map_err(|e| GraphError::Malformed {
        path: edges_path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() < 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(GraphError::Malformed {
            path: edges_path.to_path_buf(),
            line: 1,
            message: format!("expected header 'src,dst', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let line_no = i + 2;
        let malformed = |message: String| GraphError::Malformed {
            path: edges_path.to_path_buf(),
            line: line_no,
            message,
        };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != 2 {
            return Err(malformed(format!("expected 2 fields, found {}", record.len())));
        }
        let parse = |s: &str| {
            s.parse::<i64>()
                .map_err(|e| malformed(format!("bad node id '{s}': {e}")))
        };
        let (src, dst) = (parse(&record[0])?, parse(&record[1])?);
        let lookup = |id: i64| {
            index.get(&id).copied().ok_or(GraphError::DanglingEdge {
                src,
                dst,
                missing: id,
                path: edges_path.to_path_buf(),
                line: line_no,
            })
        };
        let (a, b) = (lookup(src)?, lookup(dst)?);
        if a == b {
            return Err(malformed(format!("self-loop on node {src}")));
        }
        // Repeated undirected edges are collapsed.
        if seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    }

    let any_label = labels.iter().any(Option::is_some);
    let any_split = splits.iter().any(|s| *s != Split::None);
    HeteroGraph::new(
        attributes,
        edges,
        any_label.then_some(labels),
        any_split.then_some(splits),
    )?
    .with_original_ids(original_ids)
}

/// Writes the nodes file in the same JSONL schema accepted by [`load_dataset`].
pub fn write_nodes(graph: &HeteroGraph, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in 0..graph.node_count() {
        let rec = NodeRecord {
            id: graph.original_ids[v],
            attribute: graph.attributes[v].clone(),
            label: graph.label(v),
            split: graph.splits.as_ref().map(|s| s[v]).filter(|s| *s != Split::None),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes the edges file (`src,dst` header, original ids).
pub fn write_edges(graph: &HeteroGraph, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "src,dst")?;
    for &(a, b) in &graph.edges {
        writeln!(w, "{},{}", graph.original_ids[a], graph.original_ids[b])?;
    }
    w.flush()
}
