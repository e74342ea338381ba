use std::io::Write;

use crate::error::{Error, Result};

/// Excess of noisy over clean testing loss along a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePenaltyReport {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    /// noisy(t) - clean(t)
    pub delta: Vec<f64>,
    /// sum_t max(0, delta(t))
    pub cumulative: f64,
}

impl NoisePenaltyReport {
    /// Ascending copies of both loss series for empirical CDFs.
    pub fn sorted_series(&self) -> (Vec<f64>, Vec<f64>) {
        let sort = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        (sort(&self.clean), sort(&self.noisy))
    }

    /// `t,clean,noisy,delta,cumulative,ecdf,clean_sorted,noisy_sorted`; the
    /// cumulative column is the running sum of positive parts.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (cs, ns) = self.sorted_series();
        let n = self.delta.len();
        writeln!(out, "# a_noise={}", self.cumulative)?;
        writeln!(out, "t,clean,noisy,delta,cumulative,ecdf,clean_sorted,noisy_sorted")?;
        let mut running = 0.0;
        for t in 0..n {
            running += self.delta[t].max(0.0);
            writeln!(
                out,
                "{t},{},{},{},{running},{},{},{}",
                self.clean[t],
                self.noisy[t],
                self.delta[t],
                (t + 1) as f64 / n as f64,
                cs[t],
                ns[t]
            )?;
        }
        Ok(())
    }
}

pub fn noise_penalty(clean: &[f64], noisy: &[f64]) -> Result<NoisePenaltyReport> {
    if clean.len() != noisy.len() {
        return Err(Error::Contract(format!("loss series lengths differ ({} vs {})", clean.len(), noisy.len())));
    }
    let delta: Vec<f64> = noisy.iter().zip(clean).map(|(n, c)| n - c).collect();
    let cumulative = delta.iter().map(|d| d.max(0.0)).sum();
    Ok(NoisePenaltyReport { clean: clean.to_vec(), noisy: noisy.to_vec(), delta, cumulative })
}
