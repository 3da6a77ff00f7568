//! Variable-exponent Luxemburg norms, Rayleigh-quotient minimization and
//! the large-exponent limits of the first eigenvalue on planar domains.

pub mod asymptotics;
pub mod banded;
pub mod cli;
pub mod config;
pub mod distance;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod grid;
pub mod modular;
pub mod operators;
pub mod rayleigh;
pub mod report;
pub mod subproblem;

pub use error::{Error, Result};
