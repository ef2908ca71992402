//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by model construction, estimation, learning and the
/// experiment driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid channel model: {0}")]
    InvalidModel(String),

    #[error("moment matrix is numerically singular (condition number {cond:.3e})")]
    SingularMoments { cond: f64 },

    #[error("posterior normalization underflowed (log denominator {log_denominator:.3})")]
    DegeneratePosterior { log_denominator: f64 },

    #[error("output dimension {p} too large for pattern enumeration (max {max})")]
    DimensionTooLarge { p: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("processed output has vanishing second moment ({0:.3e})")]
    ZeroPredictor(f64),

    #[error("linear system is singular; use a positive ridge parameter")]
    SingularSystem,

    #[error("cannot split {len} samples into {folds} folds")]
    FoldCount { folds: usize, len: usize },

    #[error("every trial over-estimated the rate; receding level undefined")]
    NoValidTrials,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
