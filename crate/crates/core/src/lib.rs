//! Bayesian prevalence estimation from respondent-driven samples.

pub mod baselines;
pub mod bma;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod mcmc;
pub mod mrf;
pub mod par;
pub mod rds;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
