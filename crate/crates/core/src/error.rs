use thiserror::Error;

use crate::model::CenterId;

/// Errors raised by tree construction, maintenance and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid norm exponent p = {0} (need finite p >= 1)")]
    InvalidExponent(f64),

    #[error("center set is empty")]
    EmptyCenters,

    #[error("need at least {needed} centers, got {actual}")]
    TooFewCenters { needed: usize, actual: usize },

    #[error("duplicate center coordinates (already present as id {existing})")]
    DuplicateCenter { existing: CenterId },

    #[error("unknown center id {0}")]
    UnknownCenter(CenterId),

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("query offset must be positive, got {0}")]
    NonPositiveOffset(f64),

    #[error("point coincides with the anchor; no separating cut exists")]
    NoSeparatingCut,

    #[error("coordinate {coord} = {value} lies outside the bounding box [-{bound}, {bound}]")]
    OutOfBox { coord: usize, value: f64, bound: f64 },

    #[error("need at least {needed} distinct points, got {actual}")]
    TooFewPoints { needed: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
