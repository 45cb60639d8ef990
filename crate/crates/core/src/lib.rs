//! Steady rotating and travelling vortices of the generalized surface
//! quasi-geostrophic equation, constructed by penalized energy maximization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod kernels;
pub mod nonlinearity;
pub mod pointvortex;
mod quadrature;
pub mod rearrange;
mod roots;
mod sampling;
pub mod solver;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = nalgebra::Vector2<f64>;
