//! Quantum simulation of coupled classical harmonic oscillators.
//!
//! The crate maps a spring–mass system onto a padded Hamiltonian and
//! simulates its evolution with gate-level circuits:
//! product formulas over a Pauli decomposition, and a block-encoding route
//! driven by quantum singular value transformation. A classical normal-mode
//! solver provides ground truth.

pub mod bench;
pub mod classical;
pub mod dataload;
pub mod error;
pub mod model;
pub mod observables;
pub mod qsvt;
pub mod stateprep;
pub mod statevector;
pub mod trotter;

pub use error::{Error, Result};
