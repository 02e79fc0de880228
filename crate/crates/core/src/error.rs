use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Invariant { field: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("unknown motor family `{0}`")]
    UnknownFamily(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("unsupported schema version {0}")]
    Schema(i64),

    #[error("trajectory diverges: {0}")]
    Divergent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invariant(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invariant {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
