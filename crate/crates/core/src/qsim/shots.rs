//! Shot sampling with Monte-Carlo Pauli trajectories.
//!
//! Each shot draws its own error pattern: for every (gate, qubit) slot of a
//! non-exempt gate an error occurs with probability `p`. Slots are visited by
//! geometric skipping so a shot costs O(#errors) random draws. Shots without
//! errors sample the cached noiseless distribution; the others are simulated
//! starting from the noiseless prefix state right before their first error.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::circuit::Circuit;
use super::gate::{Gate, Pauli};
use super::monomial::RunTable;
use super::noise::NoiseModel;
use super::state::{exact_probabilities, Statevector};
use crate::error::{Error, Result};

/// Measurement outcome histogram. Keys are bitstrings printed with the
/// highest-index qubit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    n_qubits: usize,
    shots: u64,
    map: BTreeMap<String, u64>,
}

impl Counts {
    fn from_indices(n_qubits: usize, hist: &BTreeMap<usize, u64>) -> Self {
        let map = hist.iter().map(|(&i, &c)| (bitstring(i, n_qubits), c)).collect();
        let shots = hist.values().sum();
        Self { n_qubits, shots, map }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, bits: &str) -> u64 {
        self.map.get(bits).copied().unwrap_or(0)
    }

    /// Count for a basis index.
    pub fn get_index(&self, index: usize) -> u64 {
        self.get(&bitstring(index, self.n_qubits))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Empirical frequencies indexed by basis state.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; 1 << self.n_qubits];
        for (bits, &c) in &self.map {
            let idx = usize::from_str_radix(bits, 2).expect("counts keys are binary");
            f[idx] = c as f64 / self.shots as f64;
        }
        f
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    format!("{index:0n_qubits$b}")
}

/// A noise slot: the unitary-gate position and the qubit that may be hit.
#[derive(Debug, Clone, Copy)]
struct Slot {
    gate: usize,
    qubit: usize,
}

#[derive(Debug, Clone, Copy)]
struct ErrorEvent {
    gate: usize,
    qubit: usize,
    pauli: Pauli,
}

struct Trajectory {
    events: Vec<ErrorEvent>,
    outcome_u: f64,
}

/// Unitary gate list and noise slots of a circuit.
struct Program {
    n_qubits: usize,
    gates: Vec<Gate>,
    slots: Vec<Slot>,
}

impl Program {
    fn compile(circuit: &Circuit) -> Self {
        let mut gates = Vec::new();
        let mut slots = Vec::new();
        for op in circuit.instructions() {
            if !op.gate.is_unitary() {
                continue;
            }
            if !op.noise_exempt {
                for qubit in op.gate.qubits().iter() {
                    slots.push(Slot { gate: gates.len(), qubit });
                }
            }
            gates.push(op.gate);
        }
        Self { n_qubits: circuit.n_qubits(), gates, slots }
    }

    fn final_state(&self) -> Result<Statevector> {
        let mut s = Statevector::zero(self.n_qubits)?;
        for g in &self.gates {
            s.apply_unchecked(g);
        }
        Ok(s)
    }

    fn sample_trajectories(&self, rng: &mut ChaCha8Rng, shots: u64, noise: &NoiseModel) -> Vec<Trajectory> {
        let p = noise.p();
        let (px, py, _) = noise.weights();
        // ln(1-p); -inf when p == 1 makes every slot an error.
        let log_q = (1.0 - p).ln();
        let n_slots = self.slots.len();
        (0..shots)
            .map(|_| {
                let mut events = Vec::new();
                let mut pos = 0usize;
                loop {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let skip = if log_q == f64::NEG_INFINITY { 0.0 } else { (u.ln() / log_q).floor() };
                    if skip >= (n_slots - pos.min(n_slots)) as f64 {
                        break;
                    }
                    pos += skip as usize;
                    if pos >= n_slots {
                        break;
                    }
                    let v = rng.random::<f64>() * p;
                    let pauli = if v < px {
                        Pauli::X
                    } else if v < px + py {
                        Pauli::Y
                    } else {
                        Pauli::Z
                    };
                    let slot = self.slots[pos];
                    events.push(ErrorEvent { gate: slot.gate, qubit: slot.qubit, pauli });
                    pos += 1;
                }
                Trajectory { events, outcome_u: rng.random::<f64>() }
            })
            .collect()
    }

    /// Runs each erroneous trajectory from the shared noiseless prefix and
    /// hands the final state to `visit`. Trajectories are processed in order
    /// of their first error so the prefix only moves forward.
    fn for_each_noisy_final(
        &self,
        trajectories: &[Trajectory],
        mut visit: impl FnMut(usize, &Statevector),
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..trajectories.len()).filter(|&i| !trajectories[i].events.is_empty()).collect();
        order.sort_by_key(|&i| trajectories[i].events[0].gate);
        let mut prefix = Statevector::zero(self.n_qubits)?;
        let mut applied = 0usize;
        for idx in order {
            let events = &trajectories[idx].events;
            let first = events[0].gate;
            while applied <= first {
                prefix.apply_unchecked(&self.gates[applied]);
                applied += 1;
            }
            let mut state = prefix.clone();
            let mut next = 0usize;
            while next < events.len() && events[next].gate == first {
                state.apply_pauli(events[next].pauli, events[next].qubit);
                next += 1;
            }
            for g in first + 1..self.gates.len() {
                state.apply_unchecked(&self.gates[g]);
                while next < events.len() && events[next].gate == g {
                    state.apply_pauli(events[next].pauli, events[next].qubit);
                    next += 1;
                }
            }
            visit(idx, &state);
        }
        Ok(())
    }
}

fn active_noise(noise: Option<&NoiseModel>) -> Option<&NoiseModel> {
    noise.filter(|m| !m.is_noiseless())
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect()
}

/// Samples `shots` computational-basis measurements of `circuit` applied to
/// |0...0>, one noise trajectory per shot.
///
/// A missing noise model and one with `p == 0` consume identical random
/// streams, so their counts agree bit-exactly for equal seeds.
pub fn run_shots(circuit: &Circuit, shots: u64, noise: Option<&NoiseModel>, seed: u64) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::Contract("shots must be >= 1".into()));
    }
    let program = Program::compile(circuit);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noiseless_cdf = cumulative(&exact_probabilities(&program.final_state()?));
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();

    match active_noise(noise) {
        None => {
            for _ in 0..shots {
                let u: f64 = rng.random();
                *hist.entry(sample_index(&noiseless_cdf, u)).or_default() += 1;
            }
        }
        Some(model) => {
            let trajectories = program.sample_trajectories(&mut rng, shots, model);
            for t in trajectories.iter().filter(|t| t.events.is_empty()) {
                *hist.entry(sample_index(&noiseless_cdf, t.outcome_u)).or_default() += 1;
            }
            program.for_each_noisy_final(&trajectories, |i, state| {
                let cdf = cumulative(&exact_probabilities(state));
                *hist.entry(sample_index(&cdf, trajectories[i].outcome_u)).or_default() += 1;
            })?;
        }
    }
    Ok(Counts::from_indices(program.n_qubits, &hist))
}

/// Amplitude budget (complex entries) for the forward/backward caches.
const CACHE_BUDGET: usize = 1 << 23;

/// Fraction of `shots` that measure the all-zeros bitstring.
///
/// Distributionally identical to `run_shots(..).get_index(0) / shots`, but
/// only the probability of |0...0> is needed per trajectory, so with caches
/// of the noiseless forward states and of the backward-propagated bra <0|
/// a trajectory costs only the gates between its first and last error.
pub fn zero_outcome_frequency(circuit: &Circuit, shots: u64, noise: Option<&NoiseModel>, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Contract("shots must be >= 1".into()));
    }
    let program = Program::compile(circuit);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_zero = program.final_state()?.amplitudes()[0].norm_sqr();

    let hits = match active_noise(noise) {
        None => (0..shots).filter(|_| rng.random::<f64>() < p_zero).count() as u64,
        Some(model) => {
            let trajectories = program.sample_trajectories(&mut rng, shots, model);
            let mut hits = trajectories.iter().filter(|t| t.events.is_empty() && t.outcome_u < p_zero).count() as u64;
            let dim = 1usize << program.n_qubits;
            if 2 * (program.gates.len() + 1) * dim <= CACHE_BUDGET {
                let cache = BraKetCache::build(&program)?;
                let mut work =
                    Workspace { state: Statevector::zero(program.n_qubits)?, scratch: Vec::with_capacity(dim) };
                for t in trajectories.iter().filter(|t| !t.events.is_empty()) {
                    if t.outcome_u < cache.zero_probability(&program, &t.events, &mut work) {
                        hits += 1;
                    }
                }
            } else {
                program.for_each_noisy_final(&trajectories, |i, state| {
                    if trajectories[i].outcome_u < state.amplitudes()[0].norm_sqr() {
                        hits += 1;
                    }
                })?;
            }
            hits
        }
    };
    Ok(hits as f64 / shots as f64)
}

/// forward[k]: state after the first k gates. backward[k]: (g_{G-1}...g_k)^dagger |0>,
/// so <0| g_{G-1}...g_k |psi> = <backward[k]|psi>.
struct BraKetCache {
    forward: Vec<Statevector>,
    backward: Vec<Statevector>,
    runs: RunTable,
}

impl BraKetCache {
    fn build(program: &Program) -> Result<Self> {
        let n_gates = program.gates.len();
        let mut forward = Vec::with_capacity(n_gates + 1);
        let mut s = Statevector::zero(program.n_qubits)?;
        forward.push(s.clone());
        for g in &program.gates {
            s.apply_unchecked(g);
            forward.push(s.clone());
        }
        let mut backward = vec![Statevector::zero(program.n_qubits)?; n_gates + 1];
        for k in (0..n_gates).rev() {
            let mut b = backward[k + 1].clone();
            b.apply_unchecked(&program.gates[k].inverse().expect("unitary gates invert"));
            backward[k] = b;
        }
        let runs = RunTable::build(&program.gates, 1 << program.n_qubits);
        Ok(Self { forward, backward, runs })
    }

    fn zero_probability(&self, program: &Program, events: &[ErrorEvent], work: &mut Workspace) -> f64 {
        let first = events[0].gate;
        let last = events[events.len() - 1].gate;
        let state = &mut work.state;
        state.amplitudes_mut().copy_from_slice(self.forward[first + 1].amplitudes());
        let mut next_gate = first + 1;
        let mut i = 0usize;
        while i < events.len() {
            let g = events[i].gate;
            if g >= next_gate {
                self.runs.apply_span(&program.gates, state, &mut work.scratch, next_gate, g);
                next_gate = g + 1;
            }
            while i < events.len() && events[i].gate == g {
                state.apply_pauli(events[i].pauli, events[i].qubit);
                i += 1;
            }
        }
        let amp: Complex64 = self.backward[last + 1].inner(state);
        amp.norm_sqr()
    }
}

struct Workspace {
    state: Statevector,
    scratch: Vec<Complex64>,
}
