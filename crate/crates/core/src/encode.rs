//! Classical-to-quantum encodings.
//!
//! Product-RY encoding maps feature `c_i` in [0, 1] to qubit `i` so that
//! P(qubit i = 1) = c_i. Amplitude encoding loads an L2-normalized vector as
//! the amplitudes of a register, built from uniformly controlled RY
//! rotations over a binary tree of subvector norms.

use crate::error::{Error, Result};
use crate::qsim::{run_from_zero, Circuit, Gate, MAX_QUBITS};

/// Clip bound keeping encoded values away from 0 and 1.
pub const CLIP_EPS: f64 = 1e-6;

/// Default L2 tolerance of amplitude preparation.
pub const EPS_PREP: f64 = 1e-9;

const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ProductRy,
    Amplitude,
}

/// A sample ready for loading into a register.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    /// Clipped values (ProductRy) or normalized, padded amplitudes (Amplitude).
    pub c: Vec<f64>,
    /// RY angles, one per qubit; empty for amplitude encoding.
    pub angles: Vec<f64>,
    pub scheme: Scheme,
}

impl EncodedSample {
    pub fn product_ry(c: &[f64]) -> Result<Self> {
        let angles = ry_angles(c)?;
        let c = c.iter().map(|v| v.clamp(CLIP_EPS, 1.0 - CLIP_EPS)).collect();
        Ok(Self { c, angles, scheme: Scheme::ProductRy })
    }

    pub fn amplitude(x: &[f64]) -> Result<Self> {
        Ok(Self { c: normalized_amplitudes(x)?, angles: Vec::new(), scheme: Scheme::Amplitude })
    }

    pub fn n_qubits(&self) -> usize {
        match self.scheme {
            Scheme::ProductRy => self.angles.len(),
            Scheme::Amplitude => self.c.len().trailing_zeros() as usize,
        }
    }

    /// State-preparation circuit for this sample.
    pub fn circuit(&self) -> Result<Circuit> {
        match self.scheme {
            Scheme::ProductRy => product_ry_prepare(&self.angles),
            Scheme::Amplitude => amplitude_prepare(&self.c),
        }
    }
}

/// Per-feature affine scaling to [0, 1] with bounds learned from data.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Contract("cannot fit a scaler on zero rows".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in rows {
            if row.len() != min.len() {
                return Err(Error::Contract("rows differ in length".into()));
            }
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| minmax_normalize(r, &self.min, &self.max)).collect()
    }
}

/// c_i = (x_i - min_i) / (max_i - min_i), clamped to [0, 1]. Constant
/// features (max == min) map to 0.5.
pub fn minmax_normalize(sample: &[f64], min: &[f64], max: &[f64]) -> Result<Vec<f64>> {
    if sample.len() != min.len() || sample.len() != max.len() {
        return Err(Error::Contract(format!(
            "sample has {} features but bounds have {}/{}",
            sample.len(),
            min.len(),
            max.len()
        )));
    }
    Ok(sample
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let span = max[k] - min[k];
            if span > 0.0 {
                ((x - min[k]) / span).clamp(0.0, 1.0)
            } else {
                log::warn!("feature {k} is constant; mapped to 0.5");
                0.5
            }
        })
        .collect())
}

/// theta_i = 2 asin(sqrt(c_i)) after clipping c_i to [eps, 1 - eps].
pub fn ry_angles(c: &[f64]) -> Result<Vec<f64>> {
    c.iter()
        .map(|&v| {
            if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                return Err(Error::Contract(format!("value {v} outside [0, 1]")));
            }
            Ok(2.0 * v.clamp(CLIP_EPS, 1.0 - CLIP_EPS).sqrt().asin())
        })
        .collect()
}

/// One RY per qubit.
pub fn product_ry_prepare(angles: &[f64]) -> Result<Circuit> {
    let mut c = Circuit::new(angles.len())?;
    for (q, &theta) in angles.iter().enumerate() {
        c.push(Gate::Ry(q, theta))?;
    }
    Ok(c)
}

/// Zero-pads `x` to a power of two (at least 2) and L2-normalizes it.
pub fn normalized_amplitudes(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("non-finite amplitude".into()));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Contract("amplitude preparation requires non-negative entries".into()));
    }
    let len = x.len().max(2).next_power_of_two();
    if len > 1 << MAX_QUBITS {
        return Err(Error::Capacity(format!("{} amplitudes exceed the register cap", x.len())));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Contract("cannot amplitude-encode the zero vector".into()));
    }
    let mut out = vec![0.0; len];
    for (o, v) in out.iter_mut().zip(x) {
        *o = v / norm;
    }
    Ok(out)
}

/// Amplitude-encoding circuit for `x` with the default tolerance.
pub fn amplitude_prepare(x: &[f64]) -> Result<Circuit> {
    amplitude_prepare_with_tolerance(x, EPS_PREP)
}

/// Builds the state-preparation circuit and verifies the prepared state is
/// within `eps` (L2) of the normalized input.
pub fn amplitude_prepare_with_tolerance(x: &[f64], eps: f64) -> Result<Circuit> {
    let target = normalized_amplitudes(x)?;
    let circuit = amplitude_circuit(&target)?;
    let state = run_from_zero(&circuit)?;
    let err =
        state.amplitudes().iter().zip(&target).map(|(a, t)| (a.re - t).powi(2) + a.im.powi(2)).sum::<f64>().sqrt();
    if err > eps {
        return Err(Error::Internal(format!("amplitude preparation error {err:e} exceeds {eps:e}")));
    }
    Ok(circuit)
}

/// Uniformly controlled RY cascade for a normalized, non-negative vector.
fn amplitude_circuit(amps: &[f64]) -> Result<Circuit> {
    let n = amps.len().trailing_zeros() as usize;
    let mut circuit = Circuit::new(n)?;
    let mut sq: Vec<f64> = amps.iter().map(|a| a * a).collect();
    let mut levels = Vec::with_capacity(n);
    // Collapse from the lowest qubit upward so levels[t] holds the squared
    // norms of blocks indexed by the bits at and above t.
    for _ in 0..n {
        levels.push(sq.clone());
        sq = sq.chunks_exact(2).map(|p| p[0] + p[1]).collect();
    }
    for t in (0..n).rev() {
        // level t: entries indexed by bits t..n-1 of the basis index.
        let blocks = &levels[t];
        let alphas: Vec<f64> = blocks.chunks_exact(2).map(|p| 2.0 * p[1].sqrt().atan2(p[0].sqrt())).collect();
        if alphas.iter().all(|&a| a == 0.0) {
            continue;
        }
        uniformly_controlled_ry(&mut circuit, t, &alphas)?;
    }
    Ok(circuit)
}

/// RY on `target` by `alphas[j]` when qubits target+1.. hold the value j.
fn uniformly_controlled_ry(circuit: &mut Circuit, target: usize, alphas: &[f64]) -> Result<()> {
    let k = alphas.len().trailing_zeros();
    if k == 0 {
        circuit.push(Gate::Ry(target, alphas[0]))?;
        return Ok(());
    }
    let m = alphas.len();
    let scale = 1.0 / m as f64;
    for i in 0..m {
        let gray = i ^ (i >> 1);
        let theta: f64 =
            alphas.iter().enumerate().map(|(j, &a)| if (j & gray).count_ones() % 2 == 0 { a } else { -a }).sum::<f64>()
                * scale;
        if theta.abs() >= 1e-15 {
            circuit.push(Gate::Ry(target, theta))?;
        }
        let bit = if i + 1 == m { k - 1 } else { (i + 1).trailing_zeros() };
        circuit.push(Gate::Cx { control: target + 1 + bit as usize, target })?;
    }
    Ok(())
}
