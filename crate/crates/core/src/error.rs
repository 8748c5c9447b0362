use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its valid range. `field` names the
    /// offending parameter so front ends can report it.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target does not provide a gradient")]
    MissingGradient,

    #[error("non-finite gradient at leapfrog step {step}")]
    NonFiniteGradient { step: usize },

    #[error("series too short: need at least {needed} values, got {got}")]
    ShortSeries { needed: usize, got: usize },

    #[error("empty trace")]
    EmptyTrace,

    #[error("matrix is not stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },

    #[error("state space too large for exact enumeration: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("grid incompatible with jump set: {0}")]
    GridIncompatible(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
