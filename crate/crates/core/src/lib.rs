//! Discretized heat conduction with mixed Dirichlet/Robin and flux
//! boundary conditions, adjoint states, and reduced-space solvers for the
//! associated boundary, distributed and simultaneous optimal control
//! problems.
//!
//! All time integrals use the right-endpoint rectangle rule on a uniform
//! grid, and the adjoint recursions are the exact transposes of the
//! backward-Euler state recursions, so discrete optimality identities hold
//! to solver precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod asymptotics;
pub mod control;
mod error;
pub mod fem;
pub mod scalar;
pub mod state;

pub use error::{Error, Result};
