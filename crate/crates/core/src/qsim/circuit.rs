use std::fmt;

use super::gate::Gate;
use super::state::{Statevector, MAX_QUBITS};
use crate::error::{Error, Result};

/// A gate plus its noise flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instruction {
    pub gate: Gate,
    /// When set, the noise channel skips this gate.
    pub noise_exempt: bool,
}

/// Ordered gate list over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!("{n_qubits} qubits outside 1..={MAX_QUBITS}")));
        }
        Ok(Self { n_qubits, ops: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.ops
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.ops.iter().map(|op| &op.gate)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        self.push_with(gate, false)
    }

    /// Appends a gate the noise channel will not touch.
    pub fn push_exempt(&mut self, gate: Gate) -> Result<&mut Self> {
        self.push_with(gate, true)
    }

    fn push_with(&mut self, gate: Gate, noise_exempt: bool) -> Result<&mut Self> {
        if self.has_measurement() {
            return Err(Error::Contract("measurement must be the final instruction".into()));
        }
        for q in gate.qubits().iter() {
            if q >= self.n_qubits {
                return Err(Error::Index(format!("{gate} references qubit {q} of {}", self.n_qubits)));
            }
        }
        if let Gate::Cx { control: a, target: b } | Gate::Cz(a, b) = gate {
            if a == b {
                return Err(Error::Index(format!("{gate} uses the same qubit twice")));
            }
        }
        self.ops.push(Instruction { gate, noise_exempt });
        Ok(self)
    }

    pub fn measure_all(&mut self) -> Result<&mut Self> {
        self.push(Gate::MeasureAll)
    }

    pub fn has_measurement(&self) -> bool {
        self.ops.last().is_some_and(|op| op.gate == Gate::MeasureAll)
    }

    /// Appends every instruction of `other` (same register size).
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Contract(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.n_qubits, self.n_qubits
            )));
        }
        for op in &other.ops {
            self.push_with(op.gate, op.noise_exempt)?;
        }
        Ok(self)
    }

    /// U^dagger: reversed order, each gate inverted. Fails on measurement.
    pub fn inverse(&self) -> Result<Circuit> {
        let mut ops = Vec::with_capacity(self.ops.len());
        for op in self.ops.iter().rev() {
            let gate = op.gate.inverse().ok_or_else(|| Error::Contract("cannot invert a measured circuit".into()))?;
            ops.push(Instruction { gate, noise_exempt: op.noise_exempt });
        }
        Ok(Circuit { n_qubits: self.n_qubits, ops })
    }

    /// Number of gates excluding barriers and measurement.
    pub fn unitary_gate_count(&self) -> usize {
        self.gates().filter(|g| g.is_unitary()).count()
    }

    pub fn count(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.gates().filter(|g| pred(g)).count()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "circuit[{} qubits, {} ops]", self.n_qubits, self.ops.len())?;
        for op in &self.ops {
            writeln!(f, "  {}{}", op.gate, if op.noise_exempt { " (exempt)" } else { "" })?;
        }
        Ok(())
    }
}

/// Applies every gate of a measurement-free circuit to `initial`.
pub fn run_exact(circuit: &Circuit, initial: &Statevector) -> Result<Statevector> {
    if circuit.n_qubits() != initial.n_qubits() {
        return Err(Error::Contract(format!(
            "circuit has {} qubits, state has {}",
            circuit.n_qubits(),
            initial.n_qubits()
        )));
    }
    if circuit.has_measurement() {
        return Err(Error::Contract("run_exact does not accept measurements; use run_shots".into()));
    }
    let mut state = initial.clone();
    for gate in circuit.gates() {
        state.apply_unchecked(gate);
    }
    Ok(state)
}

/// `run_exact` from |0...0>.
pub fn run_from_zero(circuit: &Circuit) -> Result<Statevector> {
    run_exact(circuit, &Statevector::zero(circuit.n_qubits())?)
}
