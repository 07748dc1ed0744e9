//! Low-rank estimation of signal tensors from ordinal (multi-level,
//! possibly incomplete) observations under a cumulative-link model.
//!
//! The crate provides:
//!
//! * a dense multiway-array kernel with unfolding, mode products, Tucker
//!   composition, and a higher-order SVD ([`tensor`]);
//! * logistic and probit link functions, cut-off handling, and the
//!   link-geometry constants used in diagnostics ([`link`]);
//! * the ordinal log-likelihood and its analytic derivatives in the signal
//!   tensor and the cut-off points ([`likelihood`]);
//! * a block alternating maximum-likelihood estimator with BIC rank
//!   selection, label prediction, and a continuous Tucker baseline
//!   ([`estimator`]);
//! * a seeded generative simulator ([`datagen`]);
//! * error metrics and factor-based clustering ([`metrics`]).

pub mod datagen;
mod error;
pub mod estimator;
pub mod likelihood;
pub mod link;
pub mod metrics;
pub mod tensor;

pub use error::{Error, Result};

/// Probabilities are clamped to at least this value before any logarithm
/// or denominator; keeps the objective finite when the optimizer
/// transiently leaves the bounded-signal regime.
pub const PROB_FLOOR: f64 = 1e-12;
