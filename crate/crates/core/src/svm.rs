//! Kernel SVMs on precomputed Gram matrices.
//!
//! Both the two-class and the one-class problems are solved by the same
//! SMO routine for
//!
//! ```text
//! min 1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a_i <= C
//! ```
//!
//! with second-order working-set selection.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qkernel::{kernel_matrix, FeatureMap, KernelMode};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;
const SUPPORT_EPS: f64 = 1e-8;
const PSD_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: 10_000_000 }
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    gap: f64,
}

fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn is_lower(a: f64) -> bool {
    a <= 0.0
}

fn solve(q: &Matrix, p: &[f64], y: &[f64], c: f64, alpha0: Vec<f64>, cfg: &SmoConfig) -> Solution {
    let n = y.len();
    let mut alpha = alpha0;
    let mut grad: Vec<f64> = p.to_vec();
    for (i, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            for t in 0..n {
                grad[t] += q[t][i] * a;
            }
        }
    }
    let mut gap = f64::INFINITY;
    for iter in 0..cfg.max_iter {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t], c) } else { !is_lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t], c) };
                if !in_low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let diff = gmax + yg;
                if diff > 0.0 {
                    let quad = (q[i][i] + q[t][t] - 2.0 * y[i] * y[t] * q[i][t]).max(TAU);
                    let obj = -diff * diff / quad;
                    if obj <= best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        let (Some(i), Some(j)) = (i_sel, j_sel) else { break };
        if gap < cfg.tol {
            break;
        }
        if iter + 1 == cfg.max_iter {
            log::warn!("SMO stopped at the iteration cap with KKT gap {gap:e}");
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q[i][i] + q[j][j] + 2.0 * q[i][j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q[i][i] + q[j][j] - 2.0 * q[i][j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[t][i] * di + q[t][j] * dj;
        }
    }
    let rho = compute_rho(&alpha, &grad, y, c);
    Solution { alpha, rho, gap }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t], c) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Label assigned when the decision value is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub support_idx: Vec<usize>,
    pub y: Vec<f64>,
    pub c: f64,
    pub tie: TieBreak,
    /// Maximal KKT violation at termination.
    pub kkt_gap: f64,
    /// Optimal dual objective sum(a) - 1/2 a'Qa.
    pub objective: f64,
}

impl SvmModel {
    /// sum_i a_i y_i K(x_i, x) + b
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.alpha.len() {
            return Err(Error::Contract(format!(
                "kernel row of length {} for {} training samples",
                k_row.len(),
                self.alpha.len()
            )));
        }
        Ok(self.support_idx.iter().map(|&i| self.alpha[i] * self.y[i] * k_row[i]).sum::<f64>() + self.b)
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<f64> {
        let d = self.decision(k_row)?;
        Ok(if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            match self.tie {
                TieBreak::Positive => 1.0,
                TieBreak::Negative => -1.0,
            }
        })
    }

    /// Predictions for every row of a test-by-train kernel block.
    pub fn predict_all(&self, k: &Matrix) -> Result<Vec<f64>> {
        k.iter().map(|row| self.predict(row)).collect()
    }
}

pub fn predict(model: &SvmModel, k_row: &[f64]) -> Result<f64> {
    model.predict(k_row)
}

fn check_labels(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Contract(format!("label {v} is not +1 or -1")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Contract("training labels contain a single class".into()));
    }
    Ok(())
}

fn check_psd(k: &Matrix) -> Result<()> {
    let min = linalg::min_eigenvalue(k)?;
    if min < PSD_TOL {
        return Err(Error::Contract(format!(
            "kernel matrix is not PSD (min eigenvalue {min:e}); apply psd_repair first"
        )));
    }
    Ok(())
}

fn check_square(k: &Matrix, n: usize) -> Result<()> {
    if linalg::square_order(k)? != n {
        return Err(Error::Contract(format!("kernel order {} does not match {n} samples", k.len())));
    }
    Ok(())
}

/// Soft-margin dual on a precomputed PSD kernel.
pub fn train_dual(k: &Matrix, y: &[f64], c: f64) -> Result<SvmModel> {
    train_dual_with(k, y, c, &SmoConfig::default())
}

pub fn train_dual_with(k: &Matrix, y: &[f64], c: f64, cfg: &SmoConfig) -> Result<SvmModel> {
    check_square(k, y.len())?;
    check_labels(y)?;
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Contract(format!("box constraint C = {c} must be positive")));
    }
    check_psd(k)?;
    let n = y.len();
    let q: Matrix = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let sol = solve(&q, &vec![-1.0; n], y, c, vec![0.0; n], cfg);
    let objective = dual_objective_q(&sol.alpha, &q);
    let support_idx = (0..n).filter(|&i| sol.alpha[i] > SUPPORT_EPS).collect();
    Ok(SvmModel {
        alpha: sol.alpha,
        b: -sol.rho,
        support_idx,
        y: y.to_vec(),
        c,
        tie: TieBreak::default(),
        kkt_gap: sol.gap,
        objective,
    })
}

fn dual_objective_q(alpha: &[f64], q: &Matrix) -> f64 {
    let quad: f64 =
        alpha.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(i, &a)| a * linalg::dot(&q[i], alpha)).sum();
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &Matrix) -> f64 {
    let n = y.len();
    let q: Matrix = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    dual_objective_q(alpha, &q)
}

/// Kernel-training objective: the optimal dual value of the SVM trained on
/// K(theta). By strong duality it equals the primal 1/2 |w|^2 + C sum xi,
/// so lowering it widens the margin.
pub fn svc_loss(theta: &[f64], x: &[Vec<f64>], y: &[f64], map: &FeatureMap, c: f64) -> Result<f64> {
    svc_loss_in(theta, x, y, map, c, KernelMode::Exact)
}

/// [`svc_loss`] with the kernel estimated in `mode`.
pub fn svc_loss_in(
    theta: &[f64],
    x: &[Vec<f64>],
    y: &[f64],
    map: &FeatureMap,
    c: f64,
    mode: KernelMode,
) -> Result<f64> {
    let mut k = kernel_matrix(&map.with_theta(theta)?, x, mode)?;
    k.repair()?;
    Ok(train_dual(&k.values, y, c)?.objective)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneClassModel {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub kkt_gap: f64,
}

impl OneClassModel {
    /// sum_i a_i K(x_i, x) - rho; negative values are outliers.
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.alpha.len() {
            return Err(Error::Contract("kernel row does not match the training set".into()));
        }
        Ok(linalg::dot(&self.alpha, k_row) - self.rho)
    }

    pub fn is_outlier(&self, k_row: &[f64]) -> Result<bool> {
        Ok(self.decision(k_row)? < 0.0)
    }
}

/// One-class dual: min 1/2 a'Ka, 0 <= a_i <= 1/(nu N), sum a = 1.
pub fn train_one_class(k: &Matrix, nu: f64) -> Result<OneClassModel> {
    let n = linalg::square_order(k)?;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Contract(format!("nu = {nu} outside (0, 1]")));
    }
    if n == 0 {
        return Err(Error::Contract("one-class training needs samples".into()));
    }
    check_psd(k)?;
    let upper = 1.0 / (nu * n as f64);
    // Fill the first floor(nu N) coefficients to the bound, the next with the remainder.
    let full = ((nu * n as f64).floor() as usize).min(n);
    let mut alpha0 = vec![0.0; n];
    for a in alpha0.iter_mut().take(full) {
        *a = upper;
    }
    if full < n {
        alpha0[full] = (1.0 - full as f64 * upper).max(0.0);
    }
    let sol = solve(k, &vec![0.0; n], &vec![1.0; n], upper, alpha0, &SmoConfig::default());
    Ok(OneClassModel { alpha: sol.alpha, rho: sol.rho, nu, kkt_gap: sol.gap })
}

/// Linear model w'x + b for the weighted hinge path.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

fn check_hinge_inputs(model: &LinearModel, weights: &[f64], x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.len() != weights.len() || x.is_empty() {
        return Err(Error::Contract("weights, rows and labels must have the same non-zero length".into()));
    }
    if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::Contract("sample weights must be positive".into()));
    }
    if x.iter().any(|r| r.len() != model.w.len()) {
        return Err(Error::Contract("row length does not match the weight vector".into()));
    }
    Ok(())
}

/// (1 / sum w_i) sum_i w_i max(0, 1 - y_i (w'x_i + b))
pub fn weighted_hinge_loss(model: &LinearModel, weights: &[f64], x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    check_hinge_inputs(model, weights, x, y)?;
    let total: f64 = weights.iter().sum();
    Ok(x.iter()
        .zip(y)
        .zip(weights)
        .map(|((xi, &yi), &wi)| wi * (1.0 - yi * (linalg::dot(&model.w, xi) + model.b)).max(0.0))
        .sum::<f64>()
        / total)
}

/// Subgradient of the weighted hinge with respect to (w, b). Samples with
/// margin <= 1 count as violators.
pub fn weighted_gradient(model: &LinearModel, weights: &[f64], x: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_hinge_inputs(model, weights, x, y)?;
    let total: f64 = weights.iter().sum();
    let mut gw = vec![0.0; model.w.len()];
    let mut gb = 0.0;
    for ((xi, &yi), &wi) in x.iter().zip(y).zip(weights) {
        if yi * (linalg::dot(&model.w, xi) + model.b) <= 1.0 {
            for (g, v) in gw.iter_mut().zip(xi) {
                *g -= wi * yi * v / total;
            }
            gb -= wi * yi / total;
        }
    }
    Ok((gw, gb))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on w.
    pub lambda: f64,
}

impl Default for HingeTrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 200, lambda: 1e-3 }
    }
}

/// Full-batch subgradient descent on the weighted hinge.
pub fn train_weighted_hinge(x: &[Vec<f64>], y: &[f64], weights: &[f64], cfg: &HingeTrainConfig) -> Result<LinearModel> {
    let dim = x.first().map_or(0, Vec::len);
    let mut model = LinearModel { w: vec![0.0; dim], b: 0.0 };
    for epoch in 0..cfg.epochs {
        let (gw, gb) = weighted_gradient(&model, weights, x, y)?;
        let step = cfg.learning_rate / (1.0 + epoch as f64).sqrt();
        for (w, g) in model.w.iter_mut().zip(gw) {
            *w -= step * (g + cfg.lambda * *w);
        }
        model.b -= step * gb;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Index 0: label -1 (normal), index 1: label +1 (anomalous).
    pub per_class: [ClassMetrics; 2],
    /// confusion[truth][predicted], same class order.
    pub confusion: [[usize; 2]; 2],
}

/// Accuracy, per-class precision / recall / F1 and the confusion matrix.
pub fn evaluate(predictions: &[f64], truth: &[f64]) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::Contract("cannot evaluate zero predictions".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::Contract(format!("{} predictions for {} labels", predictions.len(), truth.len())));
    }
    let idx = |v: f64| -> Result<usize> {
        match v {
            -1.0 => Ok(0),
            1.0 => Ok(1),
            v => Err(Error::Contract(format!("label {v} is not +1 or -1"))),
        }
    };
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[idx(t)?][idx(p)?] += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let class = |c: usize| {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let actual = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassMetrics { precision, recall, f1, support: actual }
    };
    Ok(Metrics {
        accuracy: ratio(confusion[0][0] + confusion[1][1], predictions.len()),
        per_class: [class(0), class(1)],
        confusion,
    })
}
