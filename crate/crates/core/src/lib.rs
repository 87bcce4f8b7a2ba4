//! Kernel-based regularized and robust FIR system identification.
//!
//! The crate covers the full estimator family for finite impulse response
//! models: least squares, kernel-regularized least squares, robust least
//! squares over Frobenius, structured (Toeplitz) and kernel-weighted
//! uncertainty balls, and their regularized variants. It also provides the
//! atomic multi-kernel covariance `S_η`, empirical-Bayes and sparse
//! (exponential-prior) hyperparameter tuning through a majorization-
//! minimization loop, and Monte Carlo harnesses for the two benchmark
//! studies.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernel;
pub mod lti;
pub mod metrics;
pub mod regression;
pub mod rng;
pub mod tuning;
pub mod verify;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, SolverOptions, UncertaintyKind, UncertaintySpec};
pub use kernel::{AtomicDictionary, HyperParams, KernelMatrix};
pub use lti::{ImpulseResponse, SignalKind, SignalSpec, TransferFunction};
pub use regression::{Dataset, RegressorMatrix};

/// Float formatting with 17 significant digits, used by every file writer.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
