use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or schedule parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Schedule calibration cannot reach the requested target.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A timestep is out of range or does not match the state it is applied to.
    #[error("timestep error: {0}")]
    Timestep(String),

    /// Array shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Data violates its declared domain (negative counts, simplex off by more
    /// than tolerance, ...), or an operation was called on an unsupported domain.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Non-finite values or diverging optimization.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A text or triplet file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Corpus ingestion failed for a specific file.
    #[error("ingestion error for {path}: {msg}")]
    Ingest { path: String, msg: String },

    /// Checkpoint container is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
