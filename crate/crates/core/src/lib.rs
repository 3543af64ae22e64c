//! Randomized primal-dual block coordinate solvers for linearly constrained
//! multi-block convex programs.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod baselines;
pub mod engine;
pub mod error;
pub mod generate;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod sampler;
pub mod smooth;
pub mod stochastic;
pub mod validate;

pub use error::{Error, Result};
