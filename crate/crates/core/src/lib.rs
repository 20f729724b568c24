//! Learning ground-state properties of parameterized, geometrically local
//! spin Hamiltonians.
//!
//! The crate covers the whole pipeline at desk scale: building Heisenberg
//! families on small grids, exact ground states, classical-shadow
//! simulation, geometric feature maps with ridge and LASSO regression, local
//! tanh network models, quasi-Monte Carlo sampling and diagnostics, and an
//! experiment harness that ties them together.

// `!(a <= b)` checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod features;
pub mod hamiltonian;
pub mod harness;
pub mod lattice;
pub mod linear;
pub mod nn;
pub mod pauli;
pub mod qmc;
pub mod shadows;
pub mod sparse;

pub use error::{Error, Result};
