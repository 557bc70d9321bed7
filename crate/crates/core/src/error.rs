//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid physical configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A sampled grid is too coarse for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// The generator kernel is not one-dimensional; no unique steady state.
    #[error("degenerate steady state: generator kernel has dimension {dim}")]
    DegenerateKernel { dim: usize },

    /// Adaptive integration step underflow, typically a stiff generator.
    #[error("stiffness error: step size underflow at t = {t:.6e}; use the steady-state solver instead")]
    Stiffness { t: f64 },

    /// Singular linear system in the weak-field solver.
    #[error("singular system: {0}")]
    Singular(String),

    /// A qubit position is not on the node/antinode grid.
    #[error("classification error: qubit {index} at x = {position}λ is {distance:.3e}λ from the nearest node/antinode")]
    OffGrid {
        index: usize,
        position: f64,
        distance: f64,
    },

    /// An asymptotic expression was requested outside its validity range.
    #[error("validity error: {0}")]
    Validity(String),

    /// Numerical linear algebra failure.
    #[error("linear algebra error: {0}")]
    Linalg(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
