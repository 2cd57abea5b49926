//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by evaluation, sampling, estimation, and probe routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GigError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid distribution parameters.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The requested value cannot be represented at working precision;
    /// use the log-scale variant instead.
    #[error("scaled representation required: {0}")]
    ScaledRepr(String),

    /// A moment or expectation does not exist for the given parameters.
    #[error("nonfinite moment: {0}")]
    NonfiniteMoment(String),

    /// An iterative numerical routine failed to converge.
    #[error("failed to converge: {0}")]
    NoConvergence(String),

    /// Numerical differentiation step underflowed or lost all precision.
    #[error("numerical derivative error: {0}")]
    DerivativeStep(String),

    /// Quadrature could not reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A probe or test was configured inconsistently (bin underfill,
    /// zero permutations, empty batch, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The sample is too small or degenerate for the requested fit.
    #[error("sample error: {0}")]
    Sample(String),

    /// A Stein test function lacks a valid boundary certificate for the
    /// target parameters.
    #[error("boundary condition not certified: {0}")]
    Boundary(String),

    /// Tail integration could not be completed reliably.
    #[error("tail truncation: {0}")]
    TailTruncation(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GigError>;
