//! Non-orthogonal CP tensor decomposition toolkit.
//!
//! The crate estimates rank-r CP decompositions whose factor columns are
//! unit-norm but not mutually orthogonal. Initial estimates come from
//! composite PCA: a truncated spectral decomposition of a grouped unfolding
//! followed by rank-one extraction per mode. Refinement runs iterative
//! concurrent orthogonalization, a fixed-point scheme that contracts the
//! tensor against right inverses of the current factor estimates. Supporting
//! modules provide synthetic data generators, coherence diagnostics,
//! baseline initializers and refiners, numerical certificates for the
//! error-bound propositions, and a Monte Carlo benchmark harness.

pub mod baselines;
pub mod bench;
pub mod coherence;
pub mod cpca;
pub mod error;
pub mod ico;
pub mod io;
pub mod model;
pub mod propcheck;
pub mod rng;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use model::CPDecomposition;
pub use tensor::{DenseTensor, Matrix};
