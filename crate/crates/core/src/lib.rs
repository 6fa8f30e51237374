//! Numerical homogenization of second-order elliptic operators with lower-order
//! terms on two-dimensional structured grids.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It covers:
//!
//! - [`fields`]: closed-form coefficient fields, hypothesis checks, mean values
//!   and Besicovitch seminorms.
//! - [`linalg`]: compressed-row matrices, preconditioned Krylov solvers and a
//!   banded direct LU.
//! - [`cell`]: periodic cell problems, correctors and homogenized coefficients.
//! - [`defect`]: correctors for periodic media with a localized defect.
//! - [`solver`]: Dirichlet problems with oscillating and homogenized coefficients.
//! - [`approx`]: smoothing operator, extension, first-order approximation and
//!   boundary-layer diagnostics.
//! - [`rates`]: error norms, epsilon sweeps and log-log slope fits.
//!
//! Everything is deterministic: transcendental functions go through `libm`
//! and all reductions run in a fixed order.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod approx;
pub mod cell;
pub mod defect;
mod error;
pub mod fem;
pub mod fields;
pub mod linalg;
pub(crate) mod math;
pub mod rates;
pub mod solver;

pub use error::{Error, Result};
pub use math::{Mat2, Vec2};
