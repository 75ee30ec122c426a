use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FelError {
    /// Invalid parameters or a grid that violates its sizing invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two inputs that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Too few samples for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The integrator produced a non-finite state or broke probability
    /// conservation beyond tolerance.
    #[error("integration failed at t = {time:.6} (realization {realization:?}): {message}")]
    Integration {
        realization: Option<usize>,
        time: f64,
        message: String,
    },

    /// A curve does not have the shape an analysis expects.
    #[error("curve shape error: {0}")]
    Shape(String),

    /// A fit did not converge.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, FelError>;
