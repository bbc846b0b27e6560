use thiserror::Error;

/// Errors raised by the biclustering library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in view {view} at row {row}, column {col}")]
    NonFinite { view: usize, row: usize, col: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Io(String),

    #[error("parse error in {file} (line {line}, column {col}): {msg}")]
    Parse {
        file: String,
        line: usize,
        col: usize,
        msg: String,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
