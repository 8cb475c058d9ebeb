use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the encoding / kernel / SVM pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} out of range (supported: 1..={max})", max = crate::statevec::MAX_QUBITS)]
    QubitRange(usize),
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("unsupported dialect: {0}")]
    UnsupportedDialect(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("svm: {0}")]
    Svm(String),
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
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
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
