use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HetopError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("empty cell in group {group:?}, category {category}")]
    EmptyCell { group: String, category: usize },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HetopError {
    fn from(e: std::io::Error) -> Self {
        HetopError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HetopError>;
