use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Relative eigenvalue threshold below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `components[j]` is the j-th principal axis (unit length).
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Matrix> {
        if let Some(r) = rows.iter().find(|r| r.len() != self.mean.len()) {
            return Err(Error::Contract(format!("row of length {} for a {}-feature PCA", r.len(), self.mean.len())));
        }
        Ok(rows
            .iter()
            .map(|r| {
                let centered: Vec<f64> = r.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
                self.components.iter().map(|v| linalg::dot(&centered, v)).collect()
            })
            .collect())
    }

    /// Maps projections back to feature space.
    pub fn inverse_transform(&self, z: &[Vec<f64>]) -> Matrix {
        z.iter()
            .map(|zr| {
                let mut out = self.mean.clone();
                for (c, v) in zr.iter().zip(&self.components) {
                    for (o, w) in out.iter_mut().zip(v) {
                        *o += c * w;
                    }
                }
                out
            })
            .collect()
    }
}

/// Top-`k` eigenvectors of the sample covariance (divide by n - 1). The
/// largest-magnitude entry of each component is made positive. If the
/// data have rank below `k`, `k` is lowered with a warning.
pub fn pca_fit(x: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::Contract("PCA needs k >= 1".into()));
    }
    if n < 2 || n < k || d < k {
        return Err(Error::Contract(format!(
            "PCA to {k} components needs at least {k} rows and features (got {n} x {d})"
        )));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in x {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (values, vectors) = linalg::symmetric_eigen(&cov)?;
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let top = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().filter(|&&v| v > RANK_TOL * top.max(f64::MIN_POSITIVE)).count();
    let k_eff = k.min(rank.max(1));
    if k_eff < k {
        log::warn!("data rank {rank} is below the requested {k} components; keeping {k_eff}");
    }
    let components = (0..k_eff)
        .map(|e| {
            let mut v: Vec<f64> = (0..d).map(|i| vectors[i][e]).collect();
            let pivot = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            v
        })
        .collect();
    let explained_variance_ratio =
        values[..k_eff].iter().map(|&v| if total > 0.0 { v.max(0.0) / total } else { 0.0 }).collect();
    Ok(PcaModel { mean, components, explained_variance_ratio })
}

pub fn pca_fit_transform(x: &[Vec<f64>], k: usize) -> Result<(PcaModel, Matrix)> {
    let model = pca_fit(x, k)?;
    let z = model.transform(x)?;
    Ok((model, z))
}
