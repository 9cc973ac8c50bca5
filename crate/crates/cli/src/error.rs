use std::fmt;

use ghgrl_core::analysis::AnalysisError;
use ghgrl_core::corruption::CorruptionError;
use ghgrl_core::graph::GraphError;
use ghgrl_core::llm::embed::EmbedError;
use ghgrl_core::llm::LlmError;
use ghgrl_core::pagnn::ModelError;
use ghgrl_core::train::TrainError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Backend(m) => write!(f, "backend error: {m}"),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(std::io::Error, serde_json::Error, GraphError, ModelError, TrainError, CorruptionError, AnalysisError);

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        if e.is_backend() {
            CliError::Backend(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Transport(_) | EmbedError::Protocol(_) => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ghgrl_core::llm::AnnotateAllError> for CliError {
    fn from(e: ghgrl_core::llm::AnnotateAllError) -> Self {
        let msg = e.to_string();
        if e.source.is_backend() {
            CliError::Backend(msg)
        } else {
            CliError::Data(msg)
        }
    }
}
