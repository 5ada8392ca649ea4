use std::path::PathBuf;

use thiserror::Error;

use crate::external::ExternalError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Panel(#[from] gridcast_core::PanelError),
    #[error(transparent)]
    Ingest(#[from] gridcast_core::IngestError),
    #[error(transparent)]
    Synth(#[from] gridcast_core::SynthError),
    #[error(transparent)]
    Stats(#[from] gridcast_core::StatsError),
    #[error(transparent)]
    Metric(#[from] gridcast_core::MetricError),
    #[error(transparent)]
    Model(#[from] gridcast_models::ModelError),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("report: {0}")]
    Report(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for usage, configuration and input problems,
    /// 3 for I/O failures. (2 is reserved for partially failed benchmarks.)
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 3,
            _ => 1,
        }
    }
}
