use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid cost {value}: costs must be finite and nonnegative")]
    InvalidCost { value: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(
        "k = {k} is not valid: every feasible solution must contain at least k items (minimum is {min_cardinality})"
    )]
    InvalidK { k: usize, min_cardinality: usize },

    #[error("k = {k} exceeds the configured maximum {max}")]
    KTooLarge { k: usize, max: usize },

    #[error("invalid convex weights: {0}")]
    InvalidWeights(String),

    #[error("scenario is not certified inside conv(U): max deviation {deviation:e}")]
    NotInHull { deviation: f64 },

    #[error("no source-sink path exists")]
    NoPath,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("instance too large for exhaustive enumeration: {count} candidates exceeds budget {budget}")]
    TooLarge { count: u64, budget: u64 },

    #[error("linear program failed: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
