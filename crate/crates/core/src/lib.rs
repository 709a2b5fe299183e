//! Subspace-based R-D spatial-frequency estimation for strictly second-order
//! non-circular sources.
//!
//! The crate provides:
//! - [`array_model`]: shift-invariant sampling grids, steering structures,
//!   the conjugate-augmented model that virtually doubles the aperture, and
//!   the sparse unitary transforms to the real-valued domain;
//! - [`signal_synth`]: strictly non-circular symbol generation and noise with
//!   prescribed second-order statistics;
//! - [`estimators`]: the augmented shift-invariance estimators (complex and
//!   real-valued form) plus the non-augmented baselines;
//! - [`perf_analysis`]: first-order subspace perturbation, per-realization
//!   error expansion, and deterministic MSE predictions;
//! - [`bounds`]: deterministic Cramér-Rao bounds and single-source closed
//!   forms;
//! - [`matching`]: minimum-cost assignment between estimated and true
//!   frequency tuples.
//!
//! All routines are pure functions of their inputs; random generation takes
//! an explicit RNG, so parallel callers stay reproducible with per-task
//! streams.

pub mod array_model;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod matching;
pub mod perf_analysis;
pub mod signal_synth;

pub use error::{Error, Result};
