//! Hamiltonian Monte Carlo with a Gaussian-reference splitting for Bayesian
//! logistic regression, plus the scalar model-problem analysis of its
//! integrators.
//!
//! Pipeline: build a [`targets::LogisticPosterior`], fit its
//! [`precompute::QuadraticReference`] at the mode, integrate with one of the
//! [`integrators::IntegratorKind`]s inside [`sampler::run_chain`], and
//! summarize with [`diagnostics::report`].

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod integrators;
pub mod linalg;
pub mod model;
pub mod precompute;
pub mod rng;
pub mod sampler;
pub mod targets;

pub use error::{Error, Result};
pub use integrators::{IntegratorKind, IntegratorSpec};
