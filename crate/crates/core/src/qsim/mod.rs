//! Dense statevector simulator with shot sampling and Pauli-noise trajectories.

mod circuit;
mod gate;
mod monomial;
mod noise;
mod shots;
mod state;

pub use circuit::{run_exact, run_from_zero, Circuit, Instruction};
pub use gate::{Gate, GateQubits, Pauli};
pub use noise::{NoiseModel, DEFAULT_DEPOLARIZING_P};
pub use shots::{bitstring, run_shots, zero_outcome_frequency, Counts};
pub use state::{exact_probabilities, Statevector, MAX_QUBITS};

/// New |0...0> register.
pub fn new_zero_state(n: usize) -> crate::Result<Statevector> {
    Statevector::zero(n)
}

/// Applies one gate to a copy of `state`.
pub fn apply_gate(state: &Statevector, gate: &Gate) -> crate::Result<Statevector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}
