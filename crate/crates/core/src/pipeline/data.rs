use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Samples with binary labels: -1 normal, +1 anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn count(&self, label: f64) -> usize {
        self.y.iter().filter(|&&v| v == label).count()
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes a header row of feature names plus `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &label) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(format!("{}", label as i64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Label strings (compared case-insensitively after trimming).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMapping {
    pub normal: Vec<String>,
    pub anomalous: Vec<String>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        let v = |s: &[&str]| s.iter().map(|x| x.to_string()).collect();
        Self {
            normal: v(&["-1", "0", "benign", "normal"]),
            anomalous: v(&["1", "+1", "malicious", "attack", "anomalous", "anomaly"]),
        }
    }
}

impl LabelMapping {
    pub fn map(&self, raw: &str) -> Option<f64> {
        let key = raw.trim().to_ascii_lowercase();
        let hit = |set: &[String]| set.iter().any(|s| s.eq_ignore_ascii_case(&key));
        if hit(&self.anomalous) {
            Some(1.0)
        } else if hit(&self.normal) {
            Some(-1.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadReport {
    /// Rows whose label could not be mapped.
    pub rejected_rows: usize,
    pub dropped_columns: Vec<String>,
}

/// Reads a CSV with a header. Columns holding any non-numeric, non-empty
/// cell are dropped; empty cells and `nan` become NaN.
pub fn load_csv(path: &Path, label_column: &str, mapping: &LabelMapping) -> Result<(Dataset, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Config(format!("{} has no header row", path.display())));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Config(format!("label column '{label_column}' not found in {}", path.display())))?;
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::Config(format!("{} has no data rows", path.display())));
    }
    let parse = |s: &str| -> Option<f64> {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("nan") {
            Some(f64::NAN)
        } else {
            t.parse::<f64>().ok()
        }
    };
    let mut report = LoadReport::default();
    let numeric: Vec<usize> = (0..headers.len())
        .filter(|&c| c != label_idx)
        .filter(|&c| {
            let ok = records.iter().all(|r| parse(&r[c]).is_some());
            if !ok {
                report.dropped_columns.push(headers[c].clone());
            }
            ok
        })
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in &records {
        match mapping.map(&r[label_idx]) {
            Some(label) => {
                x.push(numeric.iter().map(|&c| parse(&r[c]).unwrap_or(f64::NAN)).collect());
                y.push(label);
            }
            None => report.rejected_rows += 1,
        }
    }
    if report.rejected_rows > 0 {
        log::warn!("{} rows with unmappable labels rejected", report.rejected_rows);
    }
    if !report.dropped_columns.is_empty() {
        log::info!("dropped non-numeric columns: {}", report.dropped_columns.join(", "));
    }
    let ds = Dataset {
        x,
        y,
        feature_names: numeric.iter().map(|&c| headers[c].clone()).collect(),
        provenance: format!("{} (label column {label_column})", path.display()),
    };
    Ok((ds, report))
}

/// Per-feature median imputation. Features with no observed value are
/// dropped. Returns the dataset and the number of imputed cells per kept feature.
pub fn fill_missing(ds: &Dataset) -> (Dataset, Vec<usize>) {
    let d = ds.n_features();
    let mut keep = Vec::new();
    let mut medians = Vec::new();
    for j in 0..d {
        let mut col: Vec<f64> = ds.x.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
        if col.is_empty() {
            log::warn!("feature '{}' has no values and is dropped", ds.feature_names[j]);
            continue;
        }
        col.sort_by(f64::total_cmp);
        let m = col.len();
        let median = if m % 2 == 1 { col[m / 2] } else { 0.5 * (col[m / 2 - 1] + col[m / 2]) };
        keep.push(j);
        medians.push(median);
    }
    let mut counts = vec![0usize; keep.len()];
    let x =
        ds.x.iter()
            .map(|r| {
                keep.iter()
                    .enumerate()
                    .map(|(k, &j)| {
                        if r[j].is_nan() {
                            counts[k] += 1;
                            medians[k]
                        } else {
                            r[j]
                        }
                    })
                    .collect()
            })
            .collect();
    let out = Dataset {
        x,
        y: ds.y.clone(),
        feature_names: keep.iter().map(|&j| ds.feature_names[j].clone()).collect(),
        provenance: ds.provenance.clone(),
    };
    (out, counts)
}

/// Deterministic train/test split. In stratified mode each class
/// contributes to the test set in proportion to its share, rounded by
/// largest remainder so the total is exactly `test_size`.
pub fn split(ds: &Dataset, test_size: usize, stratified: bool, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if test_size == 0 || test_size >= n {
        return Err(Error::Config(format!("test size {test_size} must lie in 1..{n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(test_size);
    if stratified {
        let classes = [-1.0, 1.0];
        let members: Vec<Vec<usize>> = classes.iter().map(|&c| (0..n).filter(|&i| ds.y[i] == c).collect()).collect();
        if members.iter().any(Vec::is_empty) {
            return Err(Error::Config("stratified split needs both classes".into()));
        }
        let exact: Vec<f64> = members.iter().map(|m| test_size as f64 * m.len() as f64 / n as f64).collect();
        let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        if take.iter().sum::<usize>() < test_size {
            // Two classes: at most one extra slot, given to the larger remainder.
            let k = if exact[0].fract() >= exact[1].fract() { 0 } else { 1 };
            take[k] += 1;
        }
        for (mut idx, t) in members.into_iter().zip(take) {
            idx.shuffle(&mut rng);
            test.extend_from_slice(&idx[..t]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..test_size]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok((ds.select(&train), ds.select(&test)))
}

/// Parameters of the synthetic flow-like dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub anomaly_frac: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 150, dim: 8, anomaly_frac: 0.5, seed: 0 }
    }
}

/// Benign traffic is an even mixture of two Gaussian modes at opposite
/// corners of the unit cube; attacks form one tighter cluster at its
/// centre, so no hyperplane isolates them from the benign mixture.
pub fn synthetic_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n < 2 || cfg.dim == 0 {
        return Err(Error::Config(format!("synthetic data needs n >= 2 and dim >= 1 (got {} and {})", cfg.n, cfg.dim)));
    }
    if !(0.0..=1.0).contains(&cfg.anomaly_frac) {
        return Err(Error::Config(format!("anomaly fraction {} outside [0, 1]", cfg.anomaly_frac)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_anom = (cfg.n as f64 * cfg.anomaly_frac).round() as usize;
    let benign_sd = Normal::new(0.0, 0.08).expect("valid sd");
    let attack_sd = Normal::new(0.0, 0.05).expect("valid sd");
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        if i < n_anom {
            let row = (0..cfg.dim).map(|_| 0.5 + attack_sd.sample(&mut rng)).collect();
            rows.push((row, 1.0));
        } else {
            let center = if rng.random_bool(0.5) { 0.2 } else { 0.8 };
            let row = (0..cfg.dim).map(|_| center + benign_sd.sample(&mut rng)).collect();
            rows.push((row, -1.0));
        }
    }
    rows.shuffle(&mut rng);
    let (x, y) = rows.into_iter().unzip();
    Ok(Dataset {
        x,
        y,
        feature_names: (0..cfg.dim).map(|j| format!("f{j}")).collect(),
        provenance: format!(
            "synthetic(n={}, dim={}, anomaly_frac={}, seed={})",
            cfg.n, cfg.dim, cfg.anomaly_frac, cfg.seed
        ),
    })
}
