//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested moment does not exist for the given parameters.
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    /// Degrees-of-freedom target cannot be met by the penalized learner.
    #[error("infeasible degrees of freedom: requested {requested}, attainable range is ({lo}, {hi})")]
    InfeasibleDf { requested: f64, lo: f64, hi: f64 },

    /// A linear system required by a fit is numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// Every candidate update in a boosting step produced non-finite risk.
    #[error("boosting iteration {iteration}: every candidate update produced non-finite risk")]
    AllCandidatesFailed { iteration: usize },

    /// New data does not match the covariate schema used in training.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    /// A numerical optimizer failed to make progress.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a structural requirement.
    #[error("invalid data: {0}")]
    Data(String),

    /// Model (de)serialization failure.
    #[error("model serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
