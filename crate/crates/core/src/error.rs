use alloc::string::String;

use chrono::NaiveDateTime;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("timestamp {0} is not on the hourly grid")]
    Grid(NaiveDateTime),
    #[error("timestamps are not strictly increasing at {0}")]
    Unordered(NaiveDateTime),
    #[error("duplicate timestamp {0}")]
    Duplicate(NaiveDateTime),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("every point is missing")]
    AllMissing,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("insufficient data: need {needed} observed points, have {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("weighting is infeasible: {0}")]
    WeightingInfeasible(&'static str),
    #[error("rule not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
