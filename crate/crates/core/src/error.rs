use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CorpcaError>;

#[derive(Debug, Error)]
pub enum CorpcaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("iteration diverged at k = {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error in {}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },

    #[error("parse error in {} at byte {offset}: {detail}", path.display())]
    Parse {
        path: PathBuf,
        offset: usize,
        detail: String,
    },

    #[error("empty sequence: {0}")]
    EmptySequence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CorpcaError {
    /// Short stable tag, used by the CLI for machine-parseable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpcaError::InvalidInput(_) => "invalid-input",
            CorpcaError::Divergence { .. } => "divergence",
            CorpcaError::Domain(_) => "domain",
            CorpcaError::Format { .. } => "format",
            CorpcaError::Parse { .. } => "parse",
            CorpcaError::EmptySequence(_) => "empty-sequence",
            CorpcaError::Io(_) => "io",
            CorpcaError::Csv(_) => "csv",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> CorpcaError {
    CorpcaError::InvalidInput(msg.into())
}
