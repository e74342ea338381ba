//! Fusion of consecutive permutation-times-phase gates.
//!
//! X, Y, Z, RZ, CX and CZ each have exactly one unit-modulus entry per row,
//! and so does any product of them. A run of such gates is stored as prefix
//! products, which lets any contiguous slice of the run be applied with a
//! single gather pass.

use num_complex::Complex64;

use super::gate::Gate;
use super::state::Statevector;

/// out[i] = phase[i] * in[src[i]]
#[derive(Debug, Clone)]
pub(crate) struct Monomial {
    src: Vec<u32>,
    phase: Vec<Complex64>,
    inv: Vec<u32>,
}

pub(crate) fn is_monomial(gate: &Gate) -> bool {
    matches!(gate, Gate::X(_) | Gate::Y(_) | Gate::Z(_) | Gate::Rz(..) | Gate::Cx { .. } | Gate::Cz(..))
}

/// Row rule of a monomial gate: row `i` reads `i ^ flip` (when `flip_if`
/// bits are all set) and picks up `phases[bit pattern]`.
struct GateRows {
    flip: usize,
    flip_if: usize,
    phase_bits: [usize; 2],
    phases: [Complex64; 4],
}

impl GateRows {
    fn new(gate: &Gate) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let plain = |flip: usize, flip_if: usize| Self { flip, flip_if, phase_bits: [0, 0], phases: [one; 4] };
        match *gate {
            Gate::X(q) => plain(1 << q, 0),
            Gate::Cx { control, target } => plain(1 << target, 1 << control),
            Gate::Y(q) => Self { flip: 1 << q, flip_if: 0, phase_bits: [q, q], phases: [-i, -i, i, i] },
            Gate::Z(q) => Self { flip: 0, flip_if: 0, phase_bits: [q, q], phases: [one, one, -one, -one] },
            Gate::Rz(q, theta) => {
                let lo = Complex64::from_polar(1.0, -theta / 2.0);
                let hi = Complex64::from_polar(1.0, theta / 2.0);
                Self { flip: 0, flip_if: 0, phase_bits: [q, q], phases: [lo, lo, hi, hi] }
            }
            Gate::Cz(a, b) => Self { flip: 0, flip_if: 0, phase_bits: [a, b], phases: [one, one, one, -one] },
            _ => unreachable!("GateRows built from a non-monomial gate"),
        }
    }

    #[inline]
    fn row(&self, i: usize) -> (usize, Complex64) {
        let src = if i & self.flip_if == self.flip_if { i ^ self.flip } else { i };
        let pattern = (i >> self.phase_bits[0] & 1) << 1 | (i >> self.phase_bits[1] & 1);
        (src, self.phases[pattern])
    }
}

impl Monomial {
    fn identity(dim: usize) -> Self {
        let idx: Vec<u32> = (0..dim as u32).collect();
        Self { src: idx.clone(), phase: vec![Complex64::new(1.0, 0.0); dim], inv: idx }
    }

    /// gate * self
    fn then(&self, gate: &Gate) -> Self {
        let dim = self.src.len();
        let mut src = vec![0u32; dim];
        let mut phase = vec![Complex64::new(0.0, 0.0); dim];
        let mut inv = vec![0u32; dim];
        let rows = GateRows::new(gate);
        for i in 0..dim {
            let (g, ph) = rows.row(i);
            src[i] = self.src[g];
            phase[i] = ph * self.phase[g];
            inv[src[i] as usize] = i as u32;
        }
        Self { src, phase, inv }
    }
}

struct Run {
    start: usize,
    prefix: Vec<Monomial>,
}

/// Prefix products of every maximal monomial run of a gate list.
pub(crate) struct RunTable {
    runs: Vec<Run>,
    /// (run, offset in run) of each gate, if it belongs to a run.
    run_of: Vec<Option<(usize, usize)>>,
}

impl RunTable {
    pub(crate) fn build(gates: &[Gate], dim: usize) -> Self {
        let mut runs: Vec<Run> = Vec::new();
        let mut run_of = vec![None; gates.len()];
        let mut current: Option<Run> = None;
        for (k, g) in gates.iter().enumerate() {
            if is_monomial(g) {
                let run = current.get_or_insert_with(|| Run { start: k, prefix: Vec::new() });
                let next = match run.prefix.last() {
                    Some(m) => m.then(g),
                    None => Monomial::identity(dim).then(g),
                };
                run.prefix.push(next);
                run_of[k] = Some((runs.len(), k - run.start));
            } else if let Some(run) = current.take() {
                runs.push(run);
            }
        }
        if let Some(run) = current.take() {
            runs.push(run);
        }
        Self { runs, run_of }
    }

    /// Applies gates `first..=last` to `state`, using `scratch` as buffer.
    pub(crate) fn apply_span(
        &self,
        gates: &[Gate],
        state: &mut Statevector,
        scratch: &mut Vec<Complex64>,
        first: usize,
        last: usize,
    ) {
        let mut pos = first;
        while pos <= last {
            let Some((r, offset)) = self.run_of[pos] else {
                state.apply_unchecked(&gates[pos]);
                pos += 1;
                continue;
            };
            let run = &self.runs[r];
            let end = last.min(run.start + run.prefix.len() - 1);
            let end_offset = end - run.start;
            if end_offset == offset {
                state.apply_unchecked(&gates[pos]);
            } else {
                let amps = state.amplitudes_mut();
                scratch.clear();
                scratch.extend_from_slice(amps);
                let to = &run.prefix[end_offset];
                if offset == 0 {
                    for (i, a) in amps.iter_mut().enumerate() {
                        *a = to.phase[i] * scratch[to.src[i] as usize];
                    }
                } else {
                    let from = &run.prefix[offset - 1];
                    for (i, a) in amps.iter_mut().enumerate() {
                        let k = from.inv[to.src[i] as usize] as usize;
                        *a = to.phase[i] * from.phase[k].conj() * scratch[k];
                    }
                }
            }
            pos = end + 1;
        }
    }
}
