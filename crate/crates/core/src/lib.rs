//! Differentiable discovery of interpretable subgroups where two populations
//! differ in their conditional target distribution.

pub mod cli;
pub mod data;
pub mod densities;
pub mod error;
pub mod eval;
pub mod forest;
pub mod objective;
pub mod rules;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
