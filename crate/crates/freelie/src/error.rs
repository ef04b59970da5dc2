use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("generator index {index} out of range for rank {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("element is not homogeneous")]
    NotHomogeneous,
    #[error("degree {degree} exceeds the materialized maximum {maxdeg}")]
    DegreeOverflow { degree: usize, maxdeg: usize },
    #[error("singular linear part")]
    Singular,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
