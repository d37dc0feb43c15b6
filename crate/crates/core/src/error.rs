use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid subset of factors: {0}")]
    InvalidSubset(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("copy source exhausted: needed {needed}, {available} left")]
    InsufficientCopies { needed: usize, available: usize },

    #[error("verification failed: {0}")]
    Unverifiable(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
