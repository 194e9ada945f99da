//! Natural parameterized quantum circuits (NPQC) on a dense statevector
//! simulator.
//!
//! The crate covers the circuit construction, its quantum Fisher information
//! geometry, adaptive-learning-rate state learning, computational-basis
//! multi-parameter sensing and superposition-state synthesis, plus the
//! `npqc-lab` experiment runner in [`cli`].
//!
//! Qubits are one-based; qubit 1 is the least significant bit of a basis
//! index.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod cli;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod metrology;
pub mod npqc;
pub mod rng;
pub mod statevec;
pub mod superposition;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::{Ansatz, GradientSet, QfimMatrix};
pub use npqc::{NpqcSpec, ParamVector, Variant};
pub use statevec::{GateKind, GateOp, StateVector};
