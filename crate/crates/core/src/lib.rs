//! Feature space optimization driven by an incrementally updated
//! contextual attention evaluator.
//!
//! The evaluator scores a candidate feature set by leave-one-out impact,
//! oversamples the samples it gets wrong into fixed-size subspaces, and is
//! refit at every optimization step with a Fisher-weighted penalty that keeps
//! it close to what it learned on the previous feature set.

pub mod baselines;
pub mod data;
pub mod drivers;
pub mod error;
pub mod evaluator;
pub mod math;
pub mod metrics;
pub mod subspace;
pub mod training;

pub use error::{EaseError, Result};
