use std::io::Write;

use num_complex::Complex64;

use super::gate::{Gate, Pauli};
use crate::error::{Error, Result};

/// Hard cap on register size; 2^20 amplitudes is the desk-scale ceiling.
pub const MAX_QUBITS: usize = 20;

const NORM_TOL: f64 = 1e-10;

/// Dense pure state over `n_qubits` qubits.
///
/// Basis index bit `q` is the value of qubit `q` (qubit 0 is least significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// |0...0> on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amplitudes })
    }

    /// Wraps an explicit amplitude vector. Length must be a power of two and
    /// the vector must be normalized within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Contract(format!("amplitude count {len} is not a power of two >= 2")));
        }
        let n = len.trailing_zeros() as usize;
        check_capacity(n)?;
        let state = Self { n_qubits: n, amplitudes };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!("state norm {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Builds a state from real amplitudes (must already be normalized).
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// <self|other>
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies a unitary gate in place. Barriers are no-ops; measurement is
    /// rejected (sampling lives in the shot runner).
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.check_gate(gate)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn check_gate(&self, gate: &Gate) -> Result<()> {
        let n = self.n_qubits;
        let bad = |q: usize| q >= n;
        match *gate {
            Gate::MeasureAll => Err(Error::Contract("measurement cannot be applied as a unitary".into())),
            Gate::Cx { control: a, target: b } | Gate::Cz(a, b) => {
                if bad(a) || bad(b) {
                    Err(Error::Index(format!("{gate} references a qubit >= {n}")))
                } else if a == b {
                    Err(Error::Index(format!("{gate} uses the same qubit twice")))
                } else {
                    Ok(())
                }
            }
            g => match g.qubits().iter().find(|&q| bad(q)) {
                Some(q) => Err(Error::Index(format!("qubit {q} out of range for {n} qubits"))),
                None => Ok(()),
            },
        }
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        let amps = &mut self.amplitudes;
        match *gate {
            Gate::H(q) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for_pairs(amps, q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * s;
                    *b = (x - y) * s;
                });
            }
            Gate::X(q) => for_pairs(amps, q, std::mem::swap),
            Gate::Y(q) => for_pairs(amps, q, |a, b| {
                let (x, y) = (*a, *b);
                // Y = [[0, -i], [i, 0]]
                *a = Complex64::new(y.im, -y.re);
                *b = Complex64::new(-x.im, x.re);
            }),
            Gate::Z(q) => for_pairs(amps, q, |_, b| *b = -*b),
            Gate::Ry(q, theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                for_pairs(amps, q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                });
            }
            Gate::Rz(q, theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                let p0 = Complex64::new(c, -s);
                let p1 = Complex64::new(c, s);
                for_pairs(amps, q, |a, b| {
                    *a *= p0;
                    *b *= p1;
                });
            }
            Gate::Cx { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..amps.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        amps.swap(i, i | tmask);
                    }
                }
            }
            Gate::Cz(a, b) => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Barrier | Gate::MeasureAll => {}
        }
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub(crate) fn apply_pauli(&mut self, pauli: Pauli, qubit: usize) {
        self.apply_unchecked(&pauli.gate(qubit));
    }

    /// Writes `index,re,im` rows for debugging.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            writeln!(out, "{i},{:e},{:e}", a.re, a.im)?;
        }
        Ok(())
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity(format!("{n} qubits outside supported range 1..={MAX_QUBITS}")));
    }
    Ok(())
}

/// Calls `f` on every amplitude pair that differs only in bit `q`.
#[inline]
fn for_pairs<F>(amps: &mut [Complex64], q: usize, mut f: F)
where
    F: FnMut(&mut Complex64, &mut Complex64),
{
    let stride = 1usize << q;
    for block in amps.chunks_exact_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a, b);
        }
    }
}

/// Exact measurement distribution, p_k = |c_k|^2.
pub fn exact_probabilities(state: &Statevector) -> Vec<f64> {
    state.amplitudes.iter().map(|c| c.norm_sqr()).collect()
}
