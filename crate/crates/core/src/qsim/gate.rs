use std::fmt;

/// A single circuit instruction.
///
/// Rotation angles are in radians. `Barrier` and `MeasureAll` act on the whole
/// register; `MeasureAll` must be the last instruction of a circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    Cx { control: usize, target: usize },
    Cz(usize, usize),
    Barrier,
    MeasureAll,
}

impl Gate {
    /// Qubits the gate acts on (and therefore the qubits that receive noise).
    pub fn qubits(&self) -> GateQubits {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::Ry(q, _) | Gate::Rz(q, _) => GateQubits::One(q),
            Gate::Cx { control, target } => GateQubits::Two(control, target),
            Gate::Cz(a, b) => GateQubits::Two(a, b),
            Gate::Barrier | Gate::MeasureAll => GateQubits::None,
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Gate::Barrier | Gate::MeasureAll)
    }

    /// Inverse gate. Barriers are their own inverse; measurement has none.
    pub fn inverse(&self) -> Option<Gate> {
        match *self {
            Gate::Ry(q, t) => Some(Gate::Ry(q, -t)),
            Gate::Rz(q, t) => Some(Gate::Rz(q, -t)),
            Gate::MeasureAll => None,
            g => Some(g),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::Ry(..) => "ry",
            Gate::Rz(..) => "rz",
            Gate::Cx { .. } => "cx",
            Gate::Cz(..) => "cz",
            Gate::Barrier => "barrier",
            Gate::MeasureAll => "measure",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Ry(q, t) | Gate::Rz(q, t) => write!(f, "{}({:.6}) q{}", self.name(), t, q),
            Gate::Cx { control, target } => write!(f, "cx q{control},q{target}"),
            Gate::Cz(a, b) => write!(f, "cz q{a},q{b}"),
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => write!(f, "{} q{}", self.name(), q),
            Gate::Barrier | Gate::MeasureAll => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateQubits {
    None,
    One(usize),
    Two(usize, usize),
}

impl GateQubits {
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let (a, b) = match self {
            GateQubits::None => (None, None),
            GateQubits::One(q) => (Some(q), None),
            GateQubits::Two(p, q) => (Some(p), Some(q)),
        };
        a.into_iter().chain(b)
    }
}

/// Pauli operator inserted by the noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn gate(self, qubit: usize) -> Gate {
        match self {
            Pauli::X => Gate::X(qubit),
            Pauli::Y => Gate::Y(qubit),
            Pauli::Z => Gate::Z(qubit),
        }
    }
}
