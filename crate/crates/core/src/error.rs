use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FpmdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FpmdError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("euler sampling produced a non-finite state at step {step}")]
    Sampling { step: usize },

    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("environment `{0}` has no tractable oracle")]
    NoOracle(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("training diverged at iteration {iter}: {message}")]
    Diverged { iter: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FpmdError {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        FpmdError::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
