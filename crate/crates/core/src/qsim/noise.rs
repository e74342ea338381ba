use crate::error::{Error, Result};

/// Single-qubit Pauli channel applied after every noisy gate, on each qubit
/// the gate touches: with probability `p_x + p_y + p_z` a Pauli X, Y or Z is
/// inserted, chosen in proportion to the three weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    p_x: f64,
    p_y: f64,
    p_z: f64,
}

/// Depolarizing strength used when a noisy run does not specify one.
pub const DEFAULT_DEPOLARIZING_P: f64 = 0.01;

impl NoiseModel {
    /// Symmetric depolarizing split, p_x = p_y = p_z = p/3.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Contract(format!("noise probability {p} outside [0, 1]")));
        }
        Ok(Self { p_x: p / 3.0, p_y: p / 3.0, p_z: p / 3.0 })
    }

    pub fn pauli(p_x: f64, p_y: f64, p_z: f64) -> Result<Self> {
        let all = [p_x, p_y, p_z];
        if all.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Contract(format!("Pauli weights must be non-negative, got {all:?}")));
        }
        if p_x + p_y + p_z > 1.0 + 1e-12 {
            return Err(Error::Contract(format!("total Pauli probability {} exceeds 1", p_x + p_y + p_z)));
        }
        Ok(Self { p_x, p_y, p_z })
    }

    /// Total error probability per gate and qubit.
    pub fn p(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }

    pub fn weights(&self) -> (f64, f64, f64) {
        (self.p_x, self.p_y, self.p_z)
    }

    pub fn is_noiseless(&self) -> bool {
        self.p() == 0.0
    }
}
