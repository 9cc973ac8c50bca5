use super::ModelError;
use crate::graph::HeteroGraph;
use crate::llm::NodeAnnotation;
use crate::matrix::Matrix;

/// Graph topology fused with the per-node type estimates the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedAdjacency {
    neighbors: Vec<Vec<usize>>,
    pub format_index: Vec<usize>,
    pub format_confidence: Vec<f64>,
    pub content_index: Vec<usize>,
    pub content_confidence: Vec<f64>,
}

impl TypedAdjacency {
    pub fn from_graph(graph: &HeteroGraph, annotations: &[NodeAnnotation]) -> Result<Self, ModelError> {
        if annotations.len() != graph.node_count() {
            return Err(ModelError::Shape(format!(
                "{} annotations for {} nodes",
                annotations.len(),
                graph.node_count()
            )));
        }
        Self::new(
            graph.neighbor_lists(),
            annotations.iter().map(|a| a.format_index).collect(),
            annotations.iter().map(|a| a.format_confidence).collect(),
            annotations.iter().map(|a| a.content_index).collect(),
            annotations.iter().map(|a| a.content_confidence).collect(),
        )
    }

    /// Builds from explicit parts. Neighbor lists are sorted and must be
    /// symmetric.
    pub fn new(
        mut neighbors: Vec<Vec<usize>>,
        format_index: Vec<usize>,
        format_confidence: Vec<f64>,
        content_index: Vec<usize>,
        content_confidence: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = neighbors.len();
        if [format_index.len(), format_confidence.len(), content_index.len(), content_confidence.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(ModelError::Shape("per-node arrays must all have node_count entries".into()));
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        for (v, list) in neighbors.iter().enumerate() {
            for &u in list {
                if u >= n || neighbors[u].binary_search(&v).is_err() {
                    return Err(ModelError::Shape(format!("neighbor lists are not symmetric at ({v},{u})")));
                }
            }
        }
        if format_confidence
            .iter()
            .chain(&content_confidence)
            .any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(ModelError::Shape("confidences must lie in [0, 1]".into()));
        }
        Ok(Self {
            neighbors,
            format_index,
            format_confidence,
            content_index,
            content_confidence,
        })
    }

    /// Undirected edge list convenience constructor.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        format_index: Vec<usize>,
        format_confidence: Vec<f64>,
        content_index: Vec<usize>,
        content_confidence: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(ModelError::Shape(format!("edge ({a},{b}) out of range")));
            }
            neighbors[a].push(b);
            if a != b {
                neighbors[b].push(a);
            }
        }
        Self::new(neighbors, format_index, format_confidence, content_index, content_confidence)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn check_types(&self, num_format: usize, num_content: usize) -> Result<(), ModelError> {
        if let Some(&t) = self.format_index.iter().find(|&&t| t >= num_format) {
            return Err(ModelError::Shape(format!("format index {t} >= {num_format} types")));
        }
        if let Some(&t) = self.content_index.iter().find(|&&t| t >= num_content) {
            return Err(ModelError::Shape(format!("content index {t} >= {num_content} types")));
        }
        Ok(())
    }

    /// Row-wise neighbor mean; isolated nodes get a zero row. Neighbors are
    /// summed in ascending id order.
    pub fn mean_aggregate(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for v in 0..self.node_count() {
            let nbrs = &self.neighbors[v];
            if nbrs.is_empty() {
                continue;
            }
            let row = out.row_mut(v);
            for &u in nbrs {
                for (o, &xu) in row.iter_mut().zip(x.row(u)) {
                    *o += xu;
                }
            }
            let deg = nbrs.len() as f64;
            row.iter_mut().for_each(|o| *o /= deg);
        }
        out
    }

    /// Adjoint of [`Self::mean_aggregate`]: scatters `grad[v] / deg(v)` onto
    /// each neighbor of `v`, accumulating into `acc`.
    pub fn mean_aggregate_backward(&self, grad: &Matrix, acc: &mut Matrix) {
        for v in 0..self.node_count() {
            let nbrs = &self.neighbors[v];
            if nbrs.is_empty() {
                continue;
            }
            let deg = nbrs.len() as f64;
            for &u in nbrs {
                let g = grad.row(v);
                for (a, &gv) in acc.row_mut(u).iter_mut().zip(g) {
                    *a += gv / deg;
                }
            }
        }
    }

    /// Relabels nodes: new id of old node `v` is `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        let mut inv = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let pick = |xs: &[usize]| (0..n).map(|i| xs[inv[i]]).collect::<Vec<_>>();
        let pickf = |xs: &[f64]| (0..n).map(|i| xs[inv[i]]).collect::<Vec<_>>();
        let neighbors = (0..n)
            .map(|i| self.neighbors[inv[i]].iter().map(|&u| perm[u]).collect())
            .collect();
        Self::new(
            neighbors,
            pick(&self.format_index),
            pickf(&self.format_confidence),
            pick(&self.content_index),
            pickf(&self.content_confidence),
        )
        .expect("permutation preserves validity")
    }
}
