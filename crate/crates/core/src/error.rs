use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid kernel configuration: {0}")]
    InvalidKernel(String),

    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid dynamics model: {0}")]
    InvalidModel(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
