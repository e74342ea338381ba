//! Behavioral markers from sub-band energies: normalized entropy, the
//! chi-square goodness-of-fit decision, and per-feature statistics.

use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Default significance level of the goodness-of-fit decision.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Default number of equal-width entropy bins of the benign reference.
pub const DEFAULT_BINS: usize = 8;

const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehavioralMarkers {
    pub h_norm: f64,
    pub chi2: f64,
    pub decision: Decision,
    pub dof: usize,
}

impl BehavioralMarkers {
    /// chi2 / (chi2 + dof), in [0, 1).
    pub fn chi2_scaled(&self) -> f64 {
        self.chi2 / (self.chi2 + self.dof as f64)
    }
}

/// P_t = E_t / sum E.
pub fn relative_energies(energies: &[f64]) -> Result<Vec<f64>> {
    if energies.iter().any(|&e| e < 0.0 || !e.is_finite()) {
        return Err(Error::Contract("energies must be finite and non-negative".into()));
    }
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return Err(Error::Contract("all sub-band energies are zero".into()));
    }
    Ok(energies.iter().map(|e| e / total).collect())
}

/// Shannon entropy in bits divided by log2 T, so the result lies in [0, 1].
pub fn normalized_entropy(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::Contract(format!("entropy needs at least 2 bins, got {}", p.len())));
    }
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
    Ok((h / (p.len() as f64).log2()).clamp(0.0, 1.0))
}

/// Pearson statistic sum (O_j - E_j)^2 / E_j.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::Contract(format!("{} observed bins vs {} expected", observed.len(), expected.len())));
    }
    if let Some(e) = expected.iter().find(|&&e| e <= 0.0 || e.is_nan()) {
        return Err(Error::Contract(format!("expected bin frequency {e} is not positive")));
    }
    Ok(observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum())
}

/// Chi-square CDF with `dof` degrees of freedom: P(dof/2, x/2).
pub fn chi_square_cdf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(dof as f64 / 2.0, x / 2.0)
    }
}

/// Upper `alpha` critical value, found by bisection on the CDF.
pub fn chi_square_critical(dof: usize, alpha: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Contract("chi-square needs dof >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Contract(format!("alpha {alpha} outside (0, 1)")));
    }
    let target = 1.0 - alpha;
    let mut hi = dof as f64 + 1.0;
    while chi_square_cdf(hi, dof) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(mid, dof) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normal iff chi2 lies at or below the upper-0.05 quantile.
pub fn chi_square_decision(chi2: f64, dof: usize) -> Result<Decision> {
    chi_square_decision_at(chi2, dof, DEFAULT_ALPHA)
}

pub fn chi_square_decision_at(chi2: f64, dof: usize, alpha: f64) -> Result<Decision> {
    if dof == 0 {
        return Err(Error::Contract("chi-square needs dof >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Contract(format!("alpha {alpha} outside (0, 1)")));
    }
    // chi2 <= q(1 - alpha)  <=>  CDF(chi2) <= 1 - alpha, without inverting.
    Ok(if chi_square_cdf(chi2, dof) <= 1.0 - alpha { Decision::Normal } else { Decision::Anomalous })
}

/// Histogram reference of benign normalized entropies.
#[derive(Debug, Clone, PartialEq)]
pub struct BenignReference {
    /// Upper edges of the merged bins; the last edge is 1.
    pub upper_edges: Vec<f64>,
    /// Share of benign samples per merged bin.
    pub proportions: Vec<f64>,
    /// Batch size the merge rule was applied for.
    pub batch: usize,
}

impl BenignReference {
    pub fn dof(&self) -> usize {
        self.proportions.len() - 1
    }

    pub fn expected(&self, batch: usize) -> Vec<f64> {
        self.proportions.iter().map(|p| p * batch as f64).collect()
    }

    fn bin_of(&self, h: f64) -> usize {
        self.upper_edges.iter().position(|&e| h < e).unwrap_or(self.upper_edges.len() - 1)
    }

    /// Observed counts of `h_norms` in the merged bins.
    pub fn observed(&self, h_norms: &[f64]) -> Vec<f64> {
        let mut counts = vec![0.0; self.proportions.len()];
        for &h in h_norms {
            counts[self.bin_of(h)] += 1.0;
        }
        counts
    }

    /// Goodness of fit of a batch of entropies against the reference.
    pub fn test_batch(&self, h_norms: &[f64], alpha: f64) -> Result<(f64, Decision)> {
        let chi2 = chi_square_statistic(&self.observed(h_norms), &self.expected(h_norms.len()))?;
        Ok((chi2, chi_square_decision_at(chi2, self.dof(), alpha)?))
    }
}

/// `m` equal-width bins over [0, 1] of the benign entropies, scaled to a
/// batch of `batch` samples; adjacent bins are merged until every expected
/// count reaches 5.
pub fn build_benign_reference(benign_p: &[Vec<f64>], m: usize, batch: usize) -> Result<BenignReference> {
    let h: Vec<f64> = benign_p.iter().map(|p| normalized_entropy(p)).collect::<Result<_>>()?;
    build_reference_from_entropies(&h, m, batch)
}

pub fn build_reference_from_entropies(h_norms: &[f64], m: usize, batch: usize) -> Result<BenignReference> {
    if h_norms.len() < 30 {
        return Err(Error::Contract(format!("benign reference needs >= 30 samples, got {}", h_norms.len())));
    }
    if m < 2 || batch == 0 {
        return Err(Error::Contract("reference needs m >= 2 bins and a positive batch".into()));
    }
    let mut counts = vec![0usize; m];
    for &h in h_norms {
        counts[((h * m as f64) as usize).min(m - 1)] += 1;
    }
    let scale = batch as f64 / h_norms.len() as f64;
    let mut upper_edges = Vec::new();
    let mut merged = Vec::new();
    let mut acc = 0usize;
    for (j, &c) in counts.iter().enumerate() {
        acc += c;
        if acc as f64 * scale >= MIN_EXPECTED {
            upper_edges.push((j + 1) as f64 / m as f64);
            merged.push(acc);
            acc = 0;
        }
    }
    if acc > 0 || merged.is_empty() {
        match merged.last_mut() {
            Some(last) => *last += acc,
            None => merged.push(acc),
        }
    }
    if merged.len() < 2 {
        return Err(Error::Contract("benign reference collapses to fewer than 2 bins".into()));
    }
    upper_edges.truncate(merged.len());
    *upper_edges.last_mut().unwrap() = 1.0 + f64::EPSILON;
    let n = h_norms.len() as f64;
    Ok(BenignReference { upper_edges, proportions: merged.iter().map(|&c| c as f64 / n).collect(), batch })
}

/// Mean benign sub-band profile used for per-sample markers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandProfile {
    pub mean: Vec<f64>,
}

/// Pseudo-count scale turning relative energies into frequencies.
const PROFILE_SCALE: f64 = 100.0;
const PROFILE_FLOOR: f64 = 1e-9;

impl SubbandProfile {
    pub fn fit(benign_p: &[Vec<f64>]) -> Result<Self> {
        let first = benign_p.first().ok_or_else(|| Error::Contract("no benign samples".into()))?;
        let mut mean = vec![0.0; first.len()];
        for p in benign_p {
            if p.len() != mean.len() {
                return Err(Error::Contract("sub-band vectors differ in length".into()));
            }
            mean.iter_mut().zip(p).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= benign_p.len() as f64);
        Ok(Self { mean })
    }

    /// Entropy and goodness of fit of one sample's sub-band distribution,
    /// with the sub-bands as bins.
    pub fn markers(&self, p: &[f64], alpha: f64) -> Result<BehavioralMarkers> {
        let h_norm = normalized_entropy(p)?;
        let observed: Vec<f64> = p.iter().map(|v| v * PROFILE_SCALE).collect();
        let expected: Vec<f64> = self.mean.iter().map(|m| m.max(PROFILE_FLOOR) * PROFILE_SCALE).collect();
        let chi2 = chi_square_statistic(&observed, &expected)?;
        let dof = p.len() - 1;
        Ok(BehavioralMarkers { h_norm, chi2, decision: chi_square_decision_at(chi2, dof, alpha)?, dof })
    }
}

/// f ++ [h_norm, chi2 / (chi2 + dof)]
pub fn append_markers(features: &[f64], markers: &BehavioralMarkers) -> Result<Vec<f64>> {
    if !markers.h_norm.is_finite() || !markers.chi2.is_finite() {
        return Err(Error::Contract("markers must be finite".into()));
    }
    let mut out = features.to_vec();
    out.push(markers.h_norm);
    out.push(markers.chi2_scaled());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Population variance (divide by n).
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
    /// Non-excess kurtosis.
    pub kurtosis: Vec<f64>,
    /// Pearson correlation, unit diagonal.
    pub correlation: Vec<Vec<f64>>,
    /// sum (x_j - mu_j)(x_k - mu_k) / ((n - 1) sigma_j sigma_k) with
    /// population sigma; its diagonal is n / (n - 1).
    pub correlation_literal: Vec<Vec<f64>>,
}

/// Column statistics of a sample-by-feature matrix.
pub fn descriptive_stats(rows: &[Vec<f64>]) -> Result<FeatureStats> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Contract(format!("statistics need >= 2 samples, got {n}")));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Contract("rows differ in length".into()));
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let moment = |j: usize, k: i32| rows.iter().map(|r| (r[j] - mean[j]).powi(k)).sum::<f64>() / nf;
    let variance: Vec<f64> = (0..d).map(|j| moment(j, 2)).collect();
    let sd: Vec<f64> = variance.iter().map(|v| v.sqrt()).collect();
    let constant: Vec<bool> = sd.iter().map(|&s| s <= 1e-300).collect();
    for (j, _) in constant.iter().enumerate().filter(|(_, &c)| c) {
        log::warn!("feature {j} is constant; its correlations are set to 0");
    }
    let skewness = (0..d).map(|j| if constant[j] { 0.0 } else { moment(j, 3) / sd[j].powi(3) }).collect();
    let kurtosis = (0..d).map(|j| if constant[j] { 0.0 } else { moment(j, 4) / sd[j].powi(4) }).collect();
    let mut correlation = vec![vec![0.0; d]; d];
    let mut correlation_literal = vec![vec![0.0; d]; d];
    for j in 0..d {
        for k in 0..d {
            if j == k && constant[j] {
                correlation[j][k] = 1.0;
                correlation_literal[j][k] = 1.0;
                continue;
            }
            if constant[j] || constant[k] {
                continue;
            }
            let cross: f64 = rows.iter().map(|r| (r[j] - mean[j]) * (r[k] - mean[k])).sum();
            correlation_literal[j][k] = cross / ((nf - 1.0) * sd[j] * sd[k]);
            correlation[j][k] = if j == k { 1.0 } else { (cross / (nf * sd[j] * sd[k])).clamp(-1.0, 1.0) };
        }
    }
    Ok(FeatureStats { mean, variance, skewness, kurtosis, correlation, correlation_literal })
}
