use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("MPS parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("brute force is limited to {cap} columns, problem has {columns}")]
    SizeCap { columns: usize, cap: usize },
    #[error("grid mode needs finite bounds on every column (column {0} is unbounded)")]
    UnboundedBox(usize),
    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },
    #[error("vertex enumeration over {subsets} subsets exceeds the limit of {limit}")]
    EnumerationTooLarge { subsets: u128, limit: u128 },
}
