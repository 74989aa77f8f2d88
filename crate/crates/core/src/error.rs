use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot draw {requested} distinct compound goals from {available} element subsets")]
    TooManyGoals { requested: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command line: 1 for configuration and
    /// other errors, 2 for a missing artifact, 3 for divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::MissingArtifact(_) => 2,
            Error::Divergence(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
