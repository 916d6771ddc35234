//! Decoherence metric tensor for degenerate two-level atoms coupled to a
//! common black-body radiation bath.
//!
//! The crate builds atom configurations (optical lattices, chains, cold-gas
//! samples), evaluates the bath-induced pair kernels, assembles the time
//! dependent metric tensor `M(t) = 4f + 2Φ` for a set of observed atoms, and
//! estimates gas-averaged indirect decoherence by Monte Carlo.

pub mod asymptotics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod metric;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
pub use kernels::{BathParams, PairGeometry, TimeKernel};
