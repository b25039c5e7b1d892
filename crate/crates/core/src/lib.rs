//! Adversarial risk certificates for scenario-style learning schemes.
//!
//! The crate trains band predictors (linear or Gaussian-kernel support
//! vector regression with a learned band half-width), measures their
//! adversarial complexity on a training set, and turns that complexity
//! into distribution-free risk intervals. A convex-hull model provides a
//! small out-of-distribution demonstration.

// NaN-rejecting guards and index loops over matrices are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod complexity;
pub mod containment;
mod error;
pub mod hull;
pub mod model;
pub mod regions;
pub mod rng;
pub mod svr;

pub use error::{Error, Result};
