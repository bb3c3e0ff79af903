use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid class split: {0}")]
    InvalidSplit(String),

    #[error("personalized PageRank for node {node} did not converge in {iterations} iterations (residual {residual:e})")]
    PprNotConverged {
        node: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("cannot sample task: {0}")]
    InfeasibleTask(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("stale encoder cache: forward pass ran on generation {cached}, parameters are at {current}")]
    StaleCache { cached: u64, current: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("episode {episode} aborted: {reason}\n{diagnostic}")]
    EpisodeAborted {
        episode: usize,
        reason: String,
        diagnostic: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
