use thiserror::Error;

/// Errors raised anywhere in the swing-up / optimization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("swing-up denominator singular: |kE(E-E0) + kv R(q)| = {value:e}")]
    DenominatorSingular { value: f64 },

    #[error("Riccati iteration did not converge: {0}")]
    NotStabilizable(String),

    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("matrix not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("duplicate training point rejected")]
    DuplicatePoint,

    #[error("every candidate has already been measured")]
    AllCandidatesMeasured,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
