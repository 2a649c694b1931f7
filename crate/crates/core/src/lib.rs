//! Random Fourier features for shift-invariant kernels, with plain and
//! ridge-leverage-weighted frequency sampling.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: kernel specifications, exact Gram matrices, spectral sampling
//!   and the scalar feature map `z(v, x)`.
//! * [`features`]: weighted feature sets, scaled feature matrices, effective
//!   degrees of freedom and leverage-score samplers (exact and approximate).
//! * [`estimators`]: ridge regression in feature space, exact kernel ridge
//!   regression, hinge/logistic learners and approximation-error diagnostics.
//! * [`diagnostics`]: whitened approximation error, feature-count rules,
//!   fixed-point bounds and eigen-decay reports.
//! * [`data`]: sparse text datasets, standardisation, the spline simulation
//!   and cross-validation folds.
//! * [`experiments`]: convergence, benchmark and two-stage pipeline drivers
//!   with CSV output.
//!
//! Feature matrices always carry the `1/sqrt(s)` Monte-Carlo factor and the
//! importance weights in their columns, so `Z Z^T` is directly the kernel
//! approximation and ridge penalties are plain `lambda * |beta|^2`.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod features;
pub mod kernels;
pub mod linalg;

pub use error::{Error, Result};

/// Seeded generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
