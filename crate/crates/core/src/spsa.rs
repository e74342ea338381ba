//! Simultaneous perturbation stochastic approximation.
//!
//! Each iteration draws a Rademacher direction, evaluates the loss on both
//! sides of the current point and steps against the two-point gradient
//! estimate. Parameters are kept inside the box [-pi, pi]^d.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsaConfig {
    /// Initial perturbation magnitude c0.
    pub perturbation: f64,
    /// Initial step size a0.
    pub learning_rate: f64,
    pub iterations: usize,
    pub alpha_gain: f64,
    pub gamma_gain: f64,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self { perturbation: 0.05, learning_rate: 0.5, iterations: 10, alpha_gain: 0.602, gamma_gain: 0.101, seed: 0 }
    }
}

impl SpsaConfig {
    fn validate(&self) -> Result<()> {
        if !(self.perturbation > 0.0 && self.perturbation.is_finite()) {
            return Err(Error::Contract(format!("perturbation {} must be positive", self.perturbation)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.iterations == 0 {
            return Err(Error::Contract("SPSA needs at least one iteration".into()));
        }
        Ok(())
    }

    pub fn step_size(&self, k: usize) -> f64 {
        self.learning_rate / ((k + 1) as f64).powf(self.alpha_gain)
    }

    pub fn perturbation_size(&self, k: usize) -> f64 {
        self.perturbation / ((k + 1) as f64).powf(self.gamma_gain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsaStep {
    /// Iterate at which the two-sided evaluation was made.
    pub theta: Vec<f64>,
    /// Mean of the two evaluations, an O(c_k^2) estimate of the loss at `theta`.
    pub loss: f64,
    pub step_norm: f64,
    pub grad_norm: f64,
    /// Set when an evaluation was non-finite and the update was dropped.
    pub skipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpsaTrace {
    pub steps: Vec<SpsaStep>,
}

impl SpsaTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    /// `iteration,loss,step_norm,grad_norm,skipped,theta_0,...`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.steps.first().map_or(0, |s| s.theta.len());
        let thetas: String = (0..d).map(|i| format!(",theta_{i}")).collect();
        writeln!(out, "iteration,loss,step_norm,grad_norm,skipped{thetas}")?;
        for (k, s) in self.steps.iter().enumerate() {
            let t: String = s.theta.iter().map(|v| format!(",{v}")).collect();
            writeln!(out, "{k},{},{},{},{}{t}", s.loss, s.step_norm, s.grad_norm, s.skipped as u8)?;
        }
        Ok(())
    }
}

/// Index of the smallest finite loss; the first one on ties.
pub fn best_of_trace(trace: &SpsaTrace) -> Result<usize> {
    trace
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.loss.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (k, s)| match best {
            Some((_, l)) if l <= s.loss => best,
            _ => Some((k, s.loss)),
        })
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Contract("trace holds no finite loss".into()))
}

fn clamp_box(theta: &mut [f64]) {
    for t in theta {
        *t = t.clamp(-PI, PI);
    }
}

/// Minimizes `loss` from `theta0`. The two evaluations of an iteration run
/// concurrently. Returns the iterate with the best recorded loss.
pub fn spsa_minimize<F>(loss: F, theta0: &[f64], cfg: &SpsaConfig) -> Result<(Vec<f64>, SpsaTrace)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if theta0.is_empty() {
        return Err(Error::Contract("SPSA needs at least one parameter".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = theta0.to_vec();
    clamp_box(&mut theta);
    let mut shrink = 1.0;
    let mut trace = SpsaTrace::default();
    for k in 0..cfg.iterations {
        let c = cfg.perturbation_size(k) * shrink;
        let a = cfg.step_size(k);
        let delta: Vec<f64> = (0..theta.len()).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let shifted = |sign: f64| -> Vec<f64> {
            let mut t: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + sign * c * d).collect();
            clamp_box(&mut t);
            t
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let (lp, lm) = rayon::join(|| loss(&plus), || loss(&minus));
        let (lp, lm) = (lp?, lm?);
        if !(lp.is_finite() && lm.is_finite()) {
            log::warn!("SPSA iteration {k}: non-finite loss, halving the perturbation");
            shrink *= 0.5;
            trace.steps.push(SpsaStep {
                theta: theta.clone(),
                loss: f64::NAN,
                step_norm: 0.0,
                grad_norm: 0.0,
                skipped: true,
            });
            continue;
        }
        let scale = (lp - lm) / (2.0 * c);
        // Delta is +-1, so its elementwise inverse is itself.
        let grad: Vec<f64> = delta.iter().map(|d| scale * d).collect();
        let mut next: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - a * g).collect();
        clamp_box(&mut next);
        let step: Vec<f64> = next.iter().zip(&theta).map(|(n, t)| n - t).collect();
        trace.steps.push(SpsaStep {
            theta: theta.clone(),
            loss: 0.5 * (lp + lm),
            step_norm: linalg::norm(&step),
            grad_norm: linalg::norm(&grad),
            skipped: false,
        });
        theta = next;
    }
    let best = match best_of_trace(&trace) {
        Ok(k) => trace.steps[k].theta.clone(),
        Err(_) => theta0.to_vec(),
    };
    Ok((best, trace))
}
