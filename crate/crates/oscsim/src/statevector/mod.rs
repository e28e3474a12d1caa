//! Gate-level circuits, a dense state-vector simulator and resource counts.

pub mod circuit;
pub mod resources;
pub mod sim;

pub use circuit::{Circuit, Control, Gate, GateKind, Register, RegisterLayout, DEFAULT_QUBIT_CAP};
pub use resources::{decompose, resource_report, ResourceReport};
pub use sim::{
    circuit_unitary, fidelity, project, project_where, run_circuit, run_circuit_with, ExecPolicy, StateVector,
};
