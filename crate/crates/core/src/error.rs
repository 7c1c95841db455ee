use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config {path}:{line}: {msg}")]
    ConfigParse { path: String, line: usize, msg: String },

    #[error("shape error: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bad magic: expected \"TFDQ\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported weights format version {0}")]
    Version(u16),

    #[error("truncated weights file: {0}")]
    Truncated(String),

    #[error("weights file: {0}")]
    Format(String),

    #[error("config hash mismatch: model was trained with {model}, config is {config} (use --force to override)")]
    HashMismatch { model: String, config: String },

    #[error("{context}: {inner}")]
    Context { context: String, inner: Box<Error> },

    #[error("I/O error on {path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), error: source }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), inner: Box::new(self) }
    }
}
