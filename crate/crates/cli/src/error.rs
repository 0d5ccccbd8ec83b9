use std::io;
use std::path::PathBuf;

use pssa_core::metrics::MetricsError;
use pssa_core::simulator::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("pssa phase II fault at step {step}: {message}")]
    PhaseTwo { step: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error("{failed} of {total} ablation cells failed")]
    CellsFailed { failed: usize, total: usize },
    #[error("replay of {0} did not reproduce the recorded metrics")]
    ReplayMismatch(PathBuf),
}

impl CliError {
    /// Process exit status: 2 for the phase-II consistency fault, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::PhaseTwo { .. } => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
