//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the library. Variants carry enough context to name the
/// offending input (cell, pair of points, failed inequality).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("the trivial group has no nonzero elements")]
    TrivialGroup,
    #[error("element {0} is not reachable from the cost support")]
    Unreachable(String),
    #[error("exponent p = {0} is not above the critical value 1")]
    SubcriticalExponent(f64),
    #[error("loop is not a minimizer: gradient norm {0:e}")]
    NotMinimizer(f64),
    #[error("a 0-chain has no boundary")]
    ZeroChainBoundary,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("problem too large for the exhaustive solver: {0}")]
    TooLarge(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("grid too coarse: antipodal edge on the boundary of cell {cell:?}")]
    GridTooCoarse { cell: Vec<i64> },
    #[error("singularities too close: {0}")]
    Separation(String),
    #[error("no admissible grid offset; best candidate {best_offset:?} violates {violated}")]
    NoAdmissibleOffset {
        best_offset: Vec<usize>,
        violated: String,
    },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("collar too thin: {0}")]
    CollarTooThin(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
