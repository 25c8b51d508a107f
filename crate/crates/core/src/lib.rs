//! Galerkin estimation of differential-operator spectra with structured kernels.
//!
//! The Dirichlet energy `E[<grad f(X), grad g(X)>]` is restricted to the span of
//! `p` kernel sections anchored at landmarks drawn from the data. Dot-product and
//! distance kernels admit `O(np^2 + npd)` assembly of the resulting Gram matrices,
//! after which a `p x p` generalized eigenproblem yields the spectrum.

pub mod data;
pub mod error;
pub mod galerkin;
pub mod graph_laplacian;
pub mod ground_truth;
pub mod harness;
pub mod hermite;
pub mod io;
pub mod kernels;

pub use data::Dataset;
pub use error::{Error, Result};
pub use galerkin::{decompose, DecomposeOptions, GramTriplet, SpectralEstimate};
pub use kernels::{GradientGeometry, KernelSpec};
