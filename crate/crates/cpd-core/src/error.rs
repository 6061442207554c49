//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Shape or dimension mismatch between operands.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Mode index outside 1..=N.
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    /// Invalid argument value (rank, tolerance, grid, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Gram matrix condition number above 1e12 with no ridge.
    #[error("ill-conditioned gram matrix: smallest eigenvalue {min_eig:.3e}")]
    IllConditioned { min_eig: f64 },

    /// Iterative eigen/SVD solver failed to reach the tolerance.
    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    IterationFailure { residual: f64, iterations: usize },

    /// A contraction or normalization degenerated to (numerically) zero.
    #[error("degenerate {what} at sweep {sweep}, component {component}, mode {mode}")]
    Degenerate {
        what: &'static str,
        sweep: usize,
        component: usize,
        mode: usize,
    },

    /// Right-inverse failure during refinement; sweep 0 marks the warm start.
    #[error("right inverse failed at sweep {sweep}, mode {mode}: {source}")]
    RightInverse {
        sweep: usize,
        mode: usize,
        #[source]
        source: Box<Error>,
    },

    /// Randomized ALS initialization found too few candidate clusters.
    #[error("clustering found {found} clusters but rank is {rank}; increase the restart count")]
    ClusteringFailed { found: usize, rank: usize },

    /// Non-finite value encountered in input data.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Malformed text or JSON payload.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
