use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate user id `{0}`")]
    DuplicateUser(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("image decode failed: {0}")]
    Decode(String),

    #[error("image `{0}` not found")]
    NotFound(String),

    #[error("provider transport error: {0}")]
    Transport(String),

    #[error("provider protocol error: {0}")]
    Protocol(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("labels contain a single class; at least two are required")]
    SingleClass,

    #[error("schema mismatch: expected {expected} features, got {actual}")]
    SchemaMismatch { expected: usize, actual: usize },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
