//! Statistical generative modeling with verifiable numerics.
//!
//! The crate couples flow matching and score matching with the inference
//! machinery that makes generative components usable inside statistical
//! procedures: Stein diagnostics, orthogonalized (cross-fitted) estimation,
//! multiple imputation, and copula dependence modeling. Every estimator is
//! covered by a closed-form oracle or a small-instance brute force in the
//! test suites.

pub mod error;
pub mod num;

pub mod copula;
pub mod demos;
pub mod diagnostics;
pub mod flow;
pub mod inference;
pub mod missing;
pub mod mlp;
pub mod scorematch;

pub use error::{Error, Result};
