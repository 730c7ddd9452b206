//! Yee-grid simulation and analysis of Maxwell's equations on a box with nonlinear, delayed
//! impedance feedback on the boundary.
//!
//! The crate is organised bottom-up:
//! - [`domain`]: box geometry, staggered lattice, stencils, material tensors and assumption checks.
//! - [`feedback`]: feedback laws, their monotonicity constants and the pointwise boundary closure.
//! - [`delay_line`]: the per-sample history FIFO carrying the delayed trace.
//! - [`solver`]: time step selection, divergence projection, leapfrog stepper and runs.
//! - [`analysis`]: energies, dissipation and observability checks, decay fits and certificates.
//! - [`operator_lab`]: the stationary extended generator, monotonicity tests and resolvent solves.
//! - [`cli`]: configuration format, subcommand dispatch and sweeps.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; loops over the three axes index
// parallel per-axis arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod delay_line;
pub mod domain;
pub mod error;
pub mod feedback;
pub mod linalg;
pub mod operator_lab;
pub mod solver;

pub use error::{Error, Result};
