use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
    #[error("non-identifiable fit: {0}")]
    NonIdentifiable(String),
    #[error("test undefined: {0}")]
    UndefinedTest(String),
    #[error("effect size undefined: {0}")]
    UndefinedEffect(String),
    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
