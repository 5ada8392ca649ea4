use gridcast_autodiff::{CheckpointError, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {what} {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("series of length {got} is too short; need more than {need}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("context of length {got} is shorter than the {need} lags the model needs")]
    ContextTooShort { need: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("no training windows: {hours} hours cannot hold input {input_len} + horizon {horizon}")]
    NoWindows { hours: usize, input_len: usize, horizon: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergent { epoch: usize, batch: usize },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("parameter document: {0}")]
    Json(#[from] serde_json::Error),
}
