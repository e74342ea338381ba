//! Quantum feature maps and fidelity kernels.
//!
//! K(x, y) = |<phi(x)|phi(y)>|^2 is computed either exactly from
//! statevectors or estimated with the compute-uncompute circuit
//! U(y) U(x)^dagger, whose all-zeros frequency estimates the overlap.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mix_seed;
use crate::qsim::{run_from_zero, zero_outcome_frequency, Circuit, Gate, NoiseModel, Statevector};

/// Default repetitions of the ZZ map.
pub const DEFAULT_REPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMapKind {
    Zz { reps: usize },
    Phase,
    TrainableZz { reps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub kind: FeatureMapKind,
    pub n_qubits: usize,
    /// One RY angle per qubit (trainable map only).
    pub theta: Vec<f64>,
}

impl FeatureMap {
    pub fn zz(n_qubits: usize, reps: usize) -> Self {
        Self { kind: FeatureMapKind::Zz { reps }, n_qubits, theta: Vec::new() }
    }

    pub fn phase(n_qubits: usize) -> Self {
        Self { kind: FeatureMapKind::Phase, n_qubits, theta: Vec::new() }
    }

    pub fn trainable(theta: Vec<f64>, reps: usize) -> Self {
        Self { kind: FeatureMapKind::TrainableZz { reps }, n_qubits: theta.len(), theta }
    }

    /// Same map with new trainable angles.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        match self.kind {
            FeatureMapKind::TrainableZz { .. } if theta.len() == self.n_qubits => {
                Ok(Self { theta: theta.to_vec(), ..self.clone() })
            }
            FeatureMapKind::TrainableZz { .. } => {
                Err(Error::Contract(format!("{} angles for a {}-qubit map", theta.len(), self.n_qubits)))
            }
            _ => Err(Error::Contract("only the trainable map has parameters".into())),
        }
    }

    pub fn circuit(&self, x: &[f64]) -> Result<Circuit> {
        if x.len() != self.n_qubits {
            return Err(Error::Contract(format!("{} features for a {}-qubit map", x.len(), self.n_qubits)));
        }
        match self.kind {
            FeatureMapKind::Zz { reps } => zz_feature_map(x, reps),
            FeatureMapKind::Phase => phase_feature_map(x),
            FeatureMapKind::TrainableZz { reps } => trainable_feature_map(&self.theta, x, reps),
        }
    }

    pub fn state(&self, x: &[f64]) -> Result<Statevector> {
        run_from_zero(&self.circuit(x)?)
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FeatureMapKind::Zz { reps } => write!(f, "zz(reps={reps})"),
            FeatureMapKind::Phase => write!(f, "phase"),
            FeatureMapKind::TrainableZz { reps } => write!(f, "trainable_zz(reps={reps})"),
        }
    }
}

/// Second-order Pauli-Z evolution with linear entanglement.
pub fn zz_feature_map(x: &[f64], reps: usize) -> Result<Circuit> {
    if reps == 0 {
        return Err(Error::Contract("feature map needs reps >= 1".into()));
    }
    let n = x.len();
    let mut c = Circuit::new(n)?;
    for _ in 0..reps {
        for q in 0..n {
            c.push(Gate::H(q))?;
        }
        for (q, &v) in x.iter().enumerate() {
            c.push(Gate::Rz(q, 2.0 * v))?;
        }
        for q in 0..n.saturating_sub(1) {
            let phase = 2.0 * (PI - x[q]) * (PI - x[q + 1]);
            c.push(Gate::Cx { control: q, target: q + 1 })?;
            c.push(Gate::Rz(q + 1, phase))?;
            c.push(Gate::Cx { control: q, target: q + 1 })?;
        }
    }
    Ok(c)
}

/// H^n RZ(pi x) H^n RY(pi x) U_ent applied to |0>, with U_ent a CX ring.
pub fn phase_feature_map(x: &[f64]) -> Result<Circuit> {
    let n = x.len();
    let mut c = Circuit::new(n)?;
    if n > 1 {
        for q in 0..n {
            c.push(Gate::Cx { control: q, target: (q + 1) % n })?;
        }
    }
    for (q, &v) in x.iter().enumerate() {
        c.push(Gate::Ry(q, PI * v))?;
    }
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    for (q, &v) in x.iter().enumerate() {
        c.push(Gate::Rz(q, PI * v))?;
    }
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    Ok(c)
}

/// RY(theta_i) layer followed by the ZZ map.
pub fn trainable_feature_map(theta: &[f64], x: &[f64], reps: usize) -> Result<Circuit> {
    if theta.len() != x.len() {
        return Err(Error::Contract(format!("{} angles for {} features", theta.len(), x.len())));
    }
    let mut c = Circuit::new(x.len())?;
    for (q, &t) in theta.iter().enumerate() {
        c.push(Gate::Ry(q, t))?;
    }
    c.append(&zz_feature_map(x, reps)?)?;
    Ok(c)
}

/// |<phi(x_i)|phi(x_j)>|^2 from exact statevectors.
pub fn fidelity_exact(map: &FeatureMap, xi: &[f64], xj: &[f64]) -> Result<f64> {
    Ok(overlap(&map.state(xi)?, &map.state(xj)?))
}

fn overlap(a: &Statevector, b: &Statevector) -> f64 {
    a.inner(b).norm_sqr().min(1.0)
}

/// U(x_j) followed by U(x_i)^dagger.
pub fn compute_uncompute_circuit(map: &FeatureMap, xi: &[f64], xj: &[f64]) -> Result<Circuit> {
    let mut c = map.circuit(xj)?;
    c.append(&map.circuit(xi)?.inverse()?)?;
    Ok(c)
}

/// All-zeros frequency of the compute-uncompute circuit over `shots`.
pub fn fidelity_compute_uncompute(
    map: &FeatureMap,
    xi: &[f64],
    xj: &[f64],
    shots: u64,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<f64> {
    zero_outcome_frequency(&compute_uncompute_circuit(map, xi, xj)?, shots, noise, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelMode {
    Exact,
    Shots { shots: u64, noise: Option<NoiseModel>, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMeta {
    pub map: FeatureMap,
    pub mode: KernelMode,
    /// Frobenius norm of the PSD repair correction, once applied.
    pub repair_frobenius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Matrix,
    pub meta: KernelMeta,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clips negative eigenvalues and records the size of the correction.
    pub fn repair(&mut self) -> Result<f64> {
        let (repaired, frob) = psd_repair(&self.values)?;
        self.values = repaired;
        self.meta.repair_frobenius = Some(frob);
        Ok(frob)
    }

    /// CSV with a `#`-prefixed header block describing the kernel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# map={}", self.meta.map)?;
        writeln!(out, "# theta={}", join(&self.meta.map.theta))?;
        match self.meta.mode {
            KernelMode::Exact => writeln!(out, "# mode=exact")?,
            KernelMode::Shots { shots, noise, seed } => {
                writeln!(out, "# mode=shots")?;
                writeln!(out, "# shots={shots}")?;
                writeln!(out, "# noise_p={}", noise.map_or(0.0, |m| m.p()))?;
                writeln!(out, "# seed={seed}")?;
            }
        }
        if let Some(f) = self.meta.repair_frobenius {
            writeln!(out, "# repair_frobenius={f:e}")?;
        }
        for row in &self.values {
            writeln!(out, "{}", join(row))?;
        }
        Ok(())
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn check_rows(map: &FeatureMap, rows: &[Vec<f64>]) -> Result<()> {
    match rows.iter().find(|r| r.len() != map.n_qubits) {
        Some(r) => Err(Error::Contract(format!("row of length {} for a {}-qubit map", r.len(), map.n_qubits))),
        None => Ok(()),
    }
}

/// Symmetric Gram matrix of `rows`. Only the upper triangle is evaluated.
/// Exact mode fixes the diagonal to 1; shot mode reports it as measured.
pub fn kernel_matrix(map: &FeatureMap, rows: &[Vec<f64>], mode: KernelMode) -> Result<KernelMatrix> {
    check_rows(map, rows)?;
    let n = rows.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = match mode {
        KernelMode::Exact => {
            let states = states_of(map, rows)?;
            pairs.par_iter().map(|&(i, j)| if i == j { 1.0 } else { overlap(&states[i], &states[j]) }).collect()
        }
        KernelMode::Shots { shots, noise, seed } => pairs
            .par_iter()
            .map(|&(i, j)| {
                let s = mix_seed(seed, i as u64, j as u64);
                fidelity_compute_uncompute(map, &rows[i], &rows[j], shots, noise.as_ref(), s)
            })
            .collect::<Result<_>>()?,
    };
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(entries) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(KernelMatrix { values, meta: KernelMeta { map: map.clone(), mode, repair_frobenius: None } })
}

/// K(a_i, b_j) for every pair; rows of `a` index the result.
pub fn cross_kernel(map: &FeatureMap, a: &[Vec<f64>], b: &[Vec<f64>], mode: KernelMode) -> Result<Matrix> {
    check_rows(map, a)?;
    check_rows(map, b)?;
    match mode {
        KernelMode::Exact => {
            let sa = states_of(map, a)?;
            let sb = states_of(map, b)?;
            Ok(sa.par_iter().map(|x| sb.iter().map(|y| overlap(x, y)).collect()).collect())
        }
        KernelMode::Shots { shots, noise, seed } => {
            // A separate seed stream from the training Gram matrix.
            let stream = mix_seed(seed, u64::MAX, 0);
            (0..a.len())
                .into_par_iter()
                .map(|i| {
                    (0..b.len())
                        .map(|j| {
                            let s = mix_seed(stream, i as u64, j as u64);
                            fidelity_compute_uncompute(map, &a[i], &b[j], shots, noise.as_ref(), s)
                        })
                        .collect()
                })
                .collect()
        }
    }
}

fn states_of(map: &FeatureMap, rows: &[Vec<f64>]) -> Result<Vec<Statevector>> {
    rows.par_iter().map(|r| map.state(r)).collect()
}

pub fn rbf(xi: &[f64], xj: &[f64], gamma: f64) -> f64 {
    (-gamma * linalg::squared_distance(xi, xj)).exp()
}

/// alpha * RBF + (1 - alpha) * exact quantum fidelity.
pub fn composite_kernel(xi: &[f64], xj: &[f64], alpha: f64, gamma: f64, map: &FeatureMap) -> Result<f64> {
    check_composite(alpha, gamma)?;
    Ok(alpha * rbf(xi, xj, gamma) + (1.0 - alpha) * fidelity_exact(map, xi, xj)?)
}

/// Mixes a precomputed quantum kernel block with the RBF kernel of the
/// same row pairs.
pub fn composite_matrix(quantum: &Matrix, a: &[Vec<f64>], b: &[Vec<f64>], alpha: f64, gamma: f64) -> Result<Matrix> {
    check_composite(alpha, gamma)?;
    if quantum.len() != a.len() || quantum.iter().any(|r| r.len() != b.len()) {
        return Err(Error::Contract("kernel block shape does not match the rows".into()));
    }
    Ok(quantum
        .iter()
        .zip(a)
        .map(|(row, x)| row.iter().zip(b).map(|(q, y)| alpha * rbf(x, y, gamma) + (1.0 - alpha) * q).collect())
        .collect())
}

fn check_composite(alpha: f64, gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!("mixing weight {alpha} outside [0, 1]")));
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Contract(format!("rbf gamma {gamma} must be positive")));
    }
    Ok(())
}

/// Projects onto the PSD cone by clipping negative eigenvalues. Returns the
/// repaired matrix and the Frobenius norm of the change.
pub fn psd_repair(k: &Matrix) -> Result<(Matrix, f64)> {
    let n = linalg::square_order(k)?;
    let (values, vectors) = linalg::symmetric_eigen(k)?;
    if values.last().is_none_or(|&v| v >= 0.0) {
        return Ok((k.clone(), 0.0));
    }
    let mut out = vec![vec![0.0; n]; n];
    for (e, &lambda) in values.iter().enumerate().filter(|(_, &l)| l > 0.0) {
        for i in 0..n {
            let vi = vectors[i][e] * lambda;
            for j in 0..n {
                out[i][j] += vi * vectors[j][e];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = avg;
            out[j][i] = avg;
        }
    }
    let frob = k.iter().flatten().zip(out.iter().flatten()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok((out, frob))
}
