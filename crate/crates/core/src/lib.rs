//! Symbolic and numeric toolkit for scalar first-order variational problems.
//!
//! From a Lagrangian `L(x, u, z)` the crate derives the Euler-Lagrange
//! operator, the energy-momentum tensor `T_ij = z_i L_{z_j} - δ_ij L` and the
//! Noether system `div T + L_x = 0`, checks the identity linking them, solves
//! Dirichlet problems for the Euler-Lagrange equation on rectangular grids,
//! compares inner and admissible variations, and recovers Lagrangians from a
//! prescribed energy-momentum tensor.

pub mod error;
pub mod expr;
mod banded;
pub mod fields;
pub mod inverse_problem;
pub mod lagrangian;
pub mod pde_solver;
pub mod variations;

pub use error::{Error, Result};
