//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, statistic and inference layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Sequence or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A variance needed for studentization is exactly zero.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// A regressor has no variation on the requested sample.
    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    /// The instrument-regressor cross moment is zero.
    #[error("weak instrument: {0}")]
    WeakInstrument(String),

    /// A sample has zero scale so it cannot be normalized.
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    /// A matrix that must be symmetric is not, beyond tolerance.
    #[error("asymmetric matrix: {0}")]
    AsymmetricMatrix(String),

    /// An operation needs simulation truth that the panel does not carry.
    #[error("true parameters unavailable: {0}")]
    TruthUnavailable(String),

    /// Too many bootstrap replicates had a degenerate variance.
    #[error("excessive degenerate bootstrap replicates: {0}")]
    ExcessiveDegenerateReplicates(String),

    /// The requested configuration is outside the implemented design.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
