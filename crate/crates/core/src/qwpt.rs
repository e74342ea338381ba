//! Quantum Haar wavelet packet transform.
//!
//! Level `l` of the circuit applies H to qubit `l` followed by CX(l -> l+1),
//! optionally with RZ(pi/4) on qubit `l+1`. With the phase gate off the
//! circuit equals
//!
//! ```text
//! CX(h-1 -> h) * CZ(h-2, h-1) * ... * CZ(0, 1) * H(h-1) * ... * H(0)
//! ```
//!
//! and `H` on qubit `l` is exactly one level of the orthonormal Haar filter
//! bank applied to every packet of the previous level. Undoing the trailing
//! CX and CZ layers (see [`unscramble`]) therefore yields the full level-`h`
//! packet coefficients: bit `l` of a basis index selects the approximation
//! (0) or detail (1) branch at level `l + 1`, and the bits above `h` give the
//! position inside the packet. Measurement probabilities are unaffected by
//! the CZ layers and the CX never touches the low `h` bits, so sub-band
//! energies can be read straight from the measured distribution.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, LN_2};

use num_complex::Complex64;

use crate::encode::{minmax_normalize, EncodedSample, Scheme};
use crate::error::{Error, Result};
use crate::qsim::{exact_probabilities, run_exact, run_shots, Circuit, Gate, Statevector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Execution {
    ExactAmplitudes,
    Shots { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QwptConfig {
    pub n_qubits: usize,
    pub levels: usize,
    pub use_rz_phase: bool,
    pub execution: Execution,
}

impl QwptConfig {
    pub fn new(n_qubits: usize, levels: usize) -> Self {
        Self { n_qubits, levels, use_rz_phase: true, execution: Execution::ExactAmplitudes }
    }

    pub fn with_rz_phase(mut self, on: bool) -> Self {
        self.use_rz_phase = on;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Contract("at least one decomposition level is required".into()));
        }
        if self.n_qubits < 2 || self.levels > self.n_qubits - 1 {
            return Err(Error::Contract(format!(
                "{} levels need at least {} qubits, got {}",
                self.levels,
                self.levels + 1,
                self.n_qubits
            )));
        }
        Ok(())
    }
}

/// Measured packet features of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WptFeatures {
    /// Outcome distribution, sums to 1.
    pub f: Vec<f64>,
    /// Sub-band energies, one per level-`h` packet (quantum bit order).
    pub energies: Vec<f64>,
    /// Wavelet packet energy entropy, natural log.
    pub wpee: f64,
}

impl WptFeatures {
    fn from_distribution(mut f: Vec<f64>, levels: usize) -> Self {
        let total: f64 = f.iter().sum();
        f.iter_mut().for_each(|v| *v /= total);
        let mask = (1usize << levels) - 1;
        let mut energies = vec![0.0; 1 << levels];
        for (i, &p) in f.iter().enumerate() {
            energies[i & mask] += p;
        }
        let wpee = energy_entropy(&energies);
        Self { f, energies, wpee }
    }

    /// f ++ E ++ [wpee]
    pub fn to_row(&self) -> Vec<f64> {
        let mut row = self.f.clone();
        row.extend_from_slice(&self.energies);
        row.push(self.wpee);
        row
    }
}

/// -sum p ln p over the sub-band distribution.
pub fn energy_entropy(energies: &[f64]) -> f64 {
    let total: f64 = energies.iter().sum();
    energies.iter().map(|&e| e / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum::<f64>().max(0.0)
}

/// Upper bound of the entropy for `levels` levels.
pub fn max_wpee(levels: usize) -> f64 {
    levels as f64 * LN_2
}

pub fn build_qwpt_circuit(cfg: &QwptConfig) -> Result<Circuit> {
    cfg.validate()?;
    let mut c = Circuit::new(cfg.n_qubits)?;
    for l in 0..cfg.levels {
        c.push(Gate::Barrier)?;
        c.push(Gate::H(l))?;
        c.push(Gate::Cx { control: l, target: l + 1 })?;
        if cfg.use_rz_phase {
            c.push(Gate::Rz(l + 1, FRAC_PI_4))?;
        }
    }
    Ok(c)
}

/// Maps the circuit output (phase gate off) onto packet coefficients.
pub fn unscramble(state: &Statevector, levels: usize) -> Result<Statevector> {
    let mut s = state.clone();
    s.apply(&Gate::Cx { control: levels - 1, target: levels })?;
    for l in 0..levels - 1 {
        s.apply(&Gate::Cz(l, l + 1))?;
    }
    Ok(s)
}

/// Prepares the product-RY state of `sample`, applies the transform and
/// reads out the packet features.
pub fn run_qwpt(sample: &EncodedSample, cfg: &QwptConfig) -> Result<WptFeatures> {
    if sample.scheme != Scheme::ProductRy {
        return Err(Error::Contract("packet features expect a product-RY sample".into()));
    }
    if sample.n_qubits() != cfg.n_qubits {
        return Err(Error::Contract(format!(
            "sample has {} angles, transform expects {}",
            sample.n_qubits(),
            cfg.n_qubits
        )));
    }
    let mut circuit = sample.circuit()?;
    circuit.append(&build_qwpt_circuit(cfg)?)?;
    let f = match cfg.execution {
        Execution::ExactAmplitudes => exact_probabilities(&run_exact(&circuit, &Statevector::zero(cfg.n_qubits)?)?),
        Execution::Shots { shots, seed } => {
            circuit.measure_all()?;
            run_shots(&circuit, shots, None, seed)?.frequencies()
        }
    };
    Ok(WptFeatures::from_distribution(f, cfg.levels))
}

/// Packet tree: `nodes[l]` holds the `2^l` packets of level `l` in natural
/// order (children of packet `k` are `2k` = approximation, `2k+1` = detail).
#[derive(Debug, Clone, PartialEq)]
pub struct HaarTree {
    pub nodes: Vec<Vec<Vec<f64>>>,
}

impl HaarTree {
    pub fn leaves(&self) -> &[Vec<f64>] {
        self.nodes.last().expect("tree has a root")
    }

    /// Leaves flattened into the transform's basis-index layout.
    pub fn to_register_layout(&self) -> Vec<f64> {
        let levels = self.nodes.len() - 1;
        let leaves = self.leaves();
        let len: usize = leaves.iter().map(Vec::len).sum();
        let mask = (1usize << levels) - 1;
        (0..len).map(|i| leaves[reverse_bits(i & mask, levels)][i >> levels]).collect()
    }
}

fn reverse_bits(x: usize, bits: usize) -> usize {
    (0..bits).fold(0, |acc, b| acc | (((x >> b) & 1) << (bits - 1 - b)))
}

/// Full Haar wavelet packet decomposition down to `levels`.
pub fn classical_haar_wpt(signal: &[f64], levels: usize) -> Result<HaarTree> {
    let len = signal.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Contract(format!("signal length {len} is not a power of two")));
    }
    if 1usize << levels > len {
        return Err(Error::Contract(format!("{levels} levels exceed a signal of length {len}")));
    }
    let mut nodes = vec![vec![signal.to_vec()]];
    for _ in 0..levels {
        let next = nodes
            .last()
            .unwrap()
            .iter()
            .flat_map(|packet| {
                let a = packet.chunks_exact(2).map(|p| (p[0] + p[1]) * FRAC_1_SQRT_2).collect();
                let d = packet.chunks_exact(2).map(|p| (p[0] - p[1]) * FRAC_1_SQRT_2).collect();
                [a, d]
            })
            .collect();
        nodes.push(next);
    }
    Ok(HaarTree { nodes })
}

/// Mean L2 distance between the circuit's packet coefficients and the
/// classical decomposition of each amplitude-encoded sample.
pub fn validate_qwpt_against_classical(samples: &[Vec<f64>], cfg: &QwptConfig) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("no samples to validate".into()));
    }
    let transform = build_qwpt_circuit(cfg)?;
    let mut total = 0.0;
    for x in samples {
        let encoded = EncodedSample::amplitude(x)?;
        if encoded.n_qubits() != cfg.n_qubits {
            return Err(Error::Contract(format!("sample of length {} does not fit {} qubits", x.len(), cfg.n_qubits)));
        }
        let prepared = run_exact(&encoded.circuit()?, &Statevector::zero(cfg.n_qubits)?)?;
        let signal: Vec<f64> = prepared.amplitudes().iter().map(|a| a.re).collect();
        let quantum = unscramble(&run_exact(&transform, &prepared)?, cfg.levels)?;
        let classical = classical_haar_wpt(&signal, cfg.levels)?.to_register_layout();
        total += l2_error(quantum.amplitudes(), &classical);
    }
    Ok(total / samples.len() as f64)
}

fn l2_error(a: &[Complex64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - Complex64::new(*y, 0.0)).norm_sqr()).sum::<f64>().sqrt()
}

/// Packet tree of measured features, breadth first: the root, then its
/// approximation and detail children, and so on (`2^levels - 1` entries).
///
/// Each node applies one transform level. Its coefficients are split by the
/// level flag; each half is renormalized (a half with energy below 1e-12
/// becomes uniform), summarized by its per-qubit probabilities of reading 1,
/// min-max rescaled and re-encoded on one qubit fewer.
pub fn recursive_decompose(sample: &EncodedSample, cfg: &QwptConfig) -> Result<Vec<WptFeatures>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity((1 << cfg.levels) - 1);
    let mut frontier = vec![sample.clone()];
    for depth in 0..cfg.levels {
        let n = cfg.n_qubits - depth;
        let node_cfg = QwptConfig { n_qubits: n, levels: 1, ..*cfg };
        let mut next = Vec::new();
        for node in &frontier {
            out.push(run_qwpt(node, &node_cfg)?);
            if depth + 1 < cfg.levels {
                let (a, d) = split_branches(node, &node_cfg)?;
                next.push(a);
                next.push(d);
            }
        }
        frontier = next;
    }
    Ok(out)
}

fn split_branches(node: &EncodedSample, cfg: &QwptConfig) -> Result<(EncodedSample, EncodedSample)> {
    let mut circuit = node.circuit()?;
    circuit.append(&build_qwpt_circuit(&cfg.with_rz_phase(false))?)?;
    let coeffs = unscramble(&run_exact(&circuit, &Statevector::zero(cfg.n_qubits)?)?, 1)?;
    let probs = exact_probabilities(&coeffs);
    let branch = |flag: usize| -> Result<EncodedSample> {
        let half: Vec<f64> = probs.iter().skip(flag).step_by(2).copied().collect();
        let marginals = branch_marginals(&half, cfg.n_qubits - 1);
        let lo = marginals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = marginals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = marginals.len();
        EncodedSample::product_ry(&minmax_normalize(&marginals, &vec![lo; k], &vec![hi; k])?)
    };
    Ok((branch(0)?, branch(1)?))
}

/// P(qubit q = 1) for each of `n` qubits of a renormalized branch.
fn branch_marginals(energies: &[f64], n: usize) -> Vec<f64> {
    let total: f64 = energies.iter().sum();
    let weights: Vec<f64> = if total < 1e-12 {
        vec![1.0 / energies.len() as f64; energies.len()]
    } else {
        energies.iter().map(|e| e / total).collect()
    };
    (0..n).map(|q| weights.iter().enumerate().filter(|(i, _)| i >> q & 1 == 1).map(|(_, w)| w).sum()).collect()
}
