//! Squared-exponential GP machinery: kernels, Gram factorization with jitter,
//! posterior predictive moments (batch and incremental) and seeded sample paths.

mod kernel;
mod lattice;
mod posterior;

pub use kernel::{gram_matrix, se_kernel, Cholesky, KernelSpec, Matrix};
pub use lattice::{sample_gp_lattice, sample_gp_lattice_with, LatticeFunction, MAX_LATTICE_POINTS};
pub use posterior::{posterior_moments, Dataset, Posterior, PosteriorMoments, PredictionCache};
