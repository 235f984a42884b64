//! Numerical laboratory for worst-case initial-value problems: adversarial
//! right-hand-side constructions against nonadaptive information, reference
//! and budgeted solvers, and scaling experiments with exponent fits.

pub mod bump;
pub mod error;
pub mod fd;
pub mod field;
pub mod fooling;
pub mod geometry;
pub mod harness;
pub mod info;
pub mod nullspace;
pub mod poly;
pub mod quad;
pub mod solvers;

pub use error::{Error, Result};
