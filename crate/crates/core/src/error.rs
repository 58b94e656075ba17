use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch { op: &'static str, expected: String, actual: String },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("{what} {index} out of range (must be below {bound})")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("row count mismatch in {what}: expected {expected}, found {found}")]
    RowCountMismatch { what: String, expected: usize, found: usize },

    #[error("masks overlap: node {node} is in both {first} and {second}")]
    OverlappingMasks { node: usize, first: &'static str, second: &'static str },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn dims(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch { op, expected: expected.to_string(), actual: actual.to_string() }
    }
}
