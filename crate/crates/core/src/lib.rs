//! Heterogeneous graph representation learning with LLM-estimated node types.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`graph`] / [`corruption`]: the text-attributed graph model, loaders and
//!   the seeded RIR/RID corruption generators.
//! * [`llm`]: type-set generation, per-node annotation and embedding, behind
//!   pluggable remote and deterministic mock backends.
//! * [`pagnn`]: the parameter-adaptive GNN with exact reverse-mode gradients.
//! * [`train`]: full-graph training and Macro/Micro-F1 evaluation.
//! * [`analysis`]: over-smoothing diagnostics on simplified and full models.

pub mod analysis;
pub mod corruption;
pub mod graph;
pub mod llm;
pub mod matrix;
pub mod pagnn;
pub mod synthetic;
pub mod train;
pub mod util;

pub use graph::{load_dataset, HeteroGraph, Split};
pub use llm::embed::FeatureMatrix;
pub use llm::{NodeAnnotation, TypeSchema};
pub use matrix::Matrix;
pub use pagnn::{PagnnConfig, PagnnParams, TypedAdjacency};
