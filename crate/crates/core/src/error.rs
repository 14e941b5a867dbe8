use thiserror::Error;

use crate::choice::Alternative;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A query or set that does not fit the oracle or model it was sent to.
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Parameters that violate a precondition, detected before any query.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The oracle produced answers no position selector can produce.
    #[error("inconsistent oracle: {0}")]
    InconsistentOracle(String),

    /// Mixture frequency tables did not have the chain structure required
    /// to align positions; the sampling bad event occurred.
    #[error("alignment failure: {0}")]
    AlignmentFailure(String),

    /// Phase-1 observations left more than k-1 never-chosen alternatives.
    #[error("insufficient coverage: {found} never-chosen alternatives, expected {expected}")]
    InsufficientCoverage { found: usize, expected: usize },

    /// Two stream records orient the same pair in opposite directions, or
    /// the observed comparisons contain a cycle.
    #[error("inconsistent stream: pair ({0}, {1})")]
    InconsistentStream(Alternative, Alternative),

    #[error("invalid arity: {0}")]
    InvalidArity(String),

    /// Two distances tie, so a distance-comparison procedure is undefined.
    #[error("ambiguous distances: {0}")]
    Ambiguity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
