use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ghgrl", version, about = "LLM-typed heterogeneous graph learning pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ask the LLM for format-type and content-type names.
    GenTypes(GenTypesArgs),
    /// Annotate every node with types, confidences and a description.
    Annotate(AnnotateArgs),
    /// Embed annotations into a feature matrix.
    Embed(EmbedArgs),
    /// Train a PAGNN model.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Over-smoothing profile and linear-dependence diagnostics.
    Diagnose(DiagnoseArgs),
    /// Write a corrupted copy of a nodes file.
    Corrupt(CorruptArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    /// Nodes JSONL file.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edges CSV file (`src,dst`).
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LlmArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
    /// Model name sent to the remote endpoint.
    #[arg(long, default_value = "default")]
    pub model: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: usize,
    /// Base retry delay in milliseconds (doubles per attempt).
    #[arg(long, default_value_t = 500)]
    pub retry_delay_ms: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenTypesArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub m_fmt: usize,
    #[arg(long)]
    pub m_cont: usize,
    /// Character budget for the sampled attributes.
    #[arg(long, default_value_t = 16000)]
    pub char_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub schema: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
    /// Maximum concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Fail instead of substituting a fallback annotation.
    #[arg(long)]
    pub no_fallback: bool,
    #[arg(long, default_value_t = 0.5)]
    pub fallback_confidence: f64,
    /// Annotation cache directory (defaults to GHGRL_CACHE_DIR when set).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
    /// Width of the mock embedder.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Train share used when the nodes file carries no splits.
    #[arg(long, default_value_t = 0.2)]
    pub train_ratio: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_ratio: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 1)]
    pub format_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub content_layers: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// relu or leaky-relu.
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long)]
    pub no_input_projection: bool,
    #[arg(long, default_value_t = 0.0)]
    pub confidence_floor: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 30)]
    pub patience: usize,
    /// Seeds initialization and split generation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub history: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Seed used for split generation at training time.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Trained model for the full configuration; fresh weights otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_layer: usize,
    /// Depth of the simplified-model dependence check.
    #[arg(long, default_value_t = 50)]
    pub simplified_layers: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptKind {
    Rid,
    Rir,
}

#[derive(Debug, Args, Serialize)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum)]
    pub kind: CorruptKind,
    /// Fraction of nodes to corrupt.
    #[arg(long = "r")]
    pub ratio: f64,
    /// Fraction of tokens deleted per corrupted node (rid).
    #[arg(long, default_value_t = 0.5)]
    pub deletion: f64,
    /// Replacement pool JSONL (rir).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output nodes file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional copy of the edges file.
    #[arg(long)]
    pub out_edges: Option<PathBuf>,
}
