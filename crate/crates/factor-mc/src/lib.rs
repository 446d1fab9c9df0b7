//! Monte Carlo engine and inference toolkit for panels whose errors carry a
//! weak latent factor structure.
//!
//! The crate simulates factor panels, computes the per-unit linear and
//! quadratic statistics and their cross-sectional aggregate, estimates the
//! plug-in variance, and runs asymptotic-t and wild-bootstrap tests. An
//! experiment layer reproduces desk-scale distribution, size and power
//! studies with deterministic parallel execution, and a two-step estimation
//! module covers weighted-average, two-pass and split-sample estimators.
//!
//! Everything downstream of a master seed is a pure function of that seed:
//! replications, bootstrap replicates and reports are bit-identical for any
//! thread count.

pub mod accum;
pub mod dgp;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod stats;
pub mod two_step;

pub use error::{Error, Result};
