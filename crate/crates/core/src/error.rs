use thiserror::Error;

use crate::charts::expr::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid chart `{chart}`: {reason}")]
    InvalidChart { chart: String, reason: String },
    #[error("point {point:?} lies outside the domain of chart `{chart}` in coordinate `{coord}`")]
    OutsideDomain {
        chart: String,
        point: [f64; 3],
        coord: String,
    },
    #[error(
        "point {point:?} lies inside the singular margin of chart `{chart}`: \
         locus `{locus}` = {value} (margin {margin})"
    )]
    InsideMargin {
        chart: String,
        point: [f64; 3],
        locus: String,
        value: f64,
        margin: f64,
    },
    #[error("non-finite value while evaluating {what} at {point:?}")]
    NonFinite { what: String, point: [f64; 3] },
    #[error("jet of order {needed} requested but only order {available} is available")]
    InsufficientOrder { needed: usize, available: usize },
    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { point: [f64; 3], min_eigenvalue: f64 },
    #[error("not Einstein-Weyl at {point:?}: residual {residual} exceeds {tolerance}")]
    NotEinsteinWeyl {
        point: [f64; 3],
        residual: f64,
        tolerance: f64,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("transport step size underflow at t = {t} on path segment {segment}")]
    StepUnderflow { t: f64, segment: usize },
    #[error("unknown catalog label `{0}`")]
    UnknownLabel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
