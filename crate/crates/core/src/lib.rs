//! Numerical harmonic analysis on the Heisenberg group, the Heisenberg
//! motion group and step-two nilpotent Lie groups.

pub mod error;
pub mod heisenberg;
pub mod hermite;
pub mod motion;
pub mod runner;
pub mod samples;
pub mod step2;
pub mod uniqueness;

pub use error::{Error, Result};

pub(crate) use num_complex::Complex64 as C64;
