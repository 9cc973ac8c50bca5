//! Parameter-adaptive GNN: per-node parameters selected by estimated types.

mod adjacency;
mod checkpoint;
mod config;
mod model;
mod params;

pub use adjacency::TypedAdjacency;
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use config::{Activation, PagnnConfig};
pub use model::{
    backward_from_cache, content_forward, format_alignment_forward, forward_cached, pagnn_backward, pagnn_forward,
    regular_forward, Block, BlockCall, ForwardCache, Gradients,
};
pub use params::{init_params, ContentParams, FormatParams, LayerParams, PagnnParams};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values after the {block} of layer {layer}")]
    NonFinite { layer: usize, block: Block },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
