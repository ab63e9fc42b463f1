//! Online (stochastic approximation) versus offline (sample average
//! approximation) solvers for stochastic convex and saddle-point problems on
//! l_p balls, with a Monte Carlo harness that measures minimal sample sizes
//! and compares them with closed-form predictors.

pub mod cli;
pub mod error;
pub mod harness;
pub mod pgeom;
pub mod problems;
pub mod regularize;
pub mod sa;
pub mod saa;
pub mod summation;
pub mod theory;

pub use error::{Error, Result};
