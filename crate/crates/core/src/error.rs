use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("non-finite value in {quantity}")]
    Numerical { quantity: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Structural {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("descriptor error: {0}")]
    Descriptor(String),

    #[error("descriptor length {actual} does not match dictionary centroid length {expected}")]
    Encoding { expected: usize, actual: usize },

    #[error("dictionary error: {0}")]
    Dictionary(String),

    #[error("unsupported snapshot format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("snapshot integrity error: {0}")]
    Integrity(String),

    #[error("no categories taught")]
    EmptyRegistry,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
