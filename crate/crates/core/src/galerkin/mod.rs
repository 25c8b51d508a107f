//! Galerkin estimation of operator spectra over a Nystrom kernel basis.

mod estimate;
mod gram;
mod solve;

pub(crate) use estimate::warn_if_degenerate;
pub use estimate::{
    assemble, decompose, default_epsilon, default_p, empirical_orthogonality, evaluate_eigenfunction, max_off_diagonal,
    select_landmarks, solve_estimate, DecomposeOptions, SpectralEstimate,
};
pub(crate) use gram::check_samples;
pub use gram::{
    build_gram_generic, build_gram_laplacian, build_gram_laplacian_dist, build_gram_laplacian_dist_with,
    build_gram_laplacian_dot, build_gram_laplacian_dot_with, GramTriplet, HFunction, KernelDirichlet,
};
pub use solve::{gevd, gevd_values, gsvd, Gevd, Gsvd, Whitener};
