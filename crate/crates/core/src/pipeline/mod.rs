//! Data preparation and end-to-end experiments.
//!
//! A cell runs: load or generate data, impute, split, scale to [0, 1],
//! extract features (PCA, packet transform, or packet transform with
//! behavioral markers), reduce to the qubit count, build the kernel for
//! the cell's noise regime, train the SVM (optionally after SPSA kernel
//! training) and evaluate on the held-out split.

mod config;
mod data;
mod pca;
mod penalty;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{DataSource, ExperimentConfig, FeatureSource, KernelSpec, NoiseRegime};
pub use data::{fill_missing, load_csv, split, synthetic_dataset, Dataset, LabelMapping, LoadReport, SynthConfig};
pub use pca::{pca_fit, pca_fit_transform, PcaModel};
pub use penalty::{noise_penalty, NoisePenaltyReport};

use crate::behave::{relative_energies, SubbandProfile};
use crate::encode::{EncodedSample, MinMaxScaler};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mix_seed;
use crate::qkernel::{cross_kernel, kernel_matrix, psd_repair, rbf, FeatureMap, KernelMode};
use crate::qwpt::{run_qwpt, QwptConfig};
use crate::spsa::{best_of_trace, spsa_minimize, SpsaTrace};
use crate::svm::{evaluate, svc_loss, svc_loss_in, train_dual, Metrics};

/// Error wrapper naming the stage that failed.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Loads or generates the dataset and imputes missing values.
/// Synthetic data get `dim` features, or `min_dim` when `dim` is 0.
pub fn prepare_dataset(cfg: &ExperimentConfig, min_dim: usize) -> Result<Dataset> {
    let ds = match &cfg.data {
        DataSource::Synthetic { n, dim, anomaly_frac } => synthetic_dataset(&SynthConfig {
            n: *n,
            dim: if *dim == 0 { min_dim } else { *dim },
            anomaly_frac: *anomaly_frac,
            seed: cfg.seed,
        })?,
        DataSource::Csv { path, label_column } => load_csv(path, label_column, &LabelMapping::default())?.0,
    };
    let (ds, imputed) = fill_missing(&ds);
    let total: usize = imputed.iter().sum();
    if total > 0 {
        log::info!("imputed {total} missing cells");
    }
    Ok(ds)
}

/// Test split of `test_size`, then a stratified subsample of `train_size`
/// from the remainder when it is larger.
pub fn split_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let (rest, test) = split(ds, cfg.test_size, cfg.stratified, mix_seed(cfg.seed, 1, 0))?;
    let train = if rest.len() > cfg.train_size {
        split(&rest, cfg.train_size, cfg.stratified, mix_seed(cfg.seed, 2, 0))?.1
    } else {
        if rest.len() < cfg.train_size {
            log::warn!("only {} training rows available (asked for {})", rest.len(), cfg.train_size);
        }
        rest
    };
    Ok((train, test))
}

/// Kernel-ready features for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub train: Matrix,
    pub test: Matrix,
    pub raw_dim: usize,
}

fn qwpt_rows(rows: &[Vec<f64>], cfg: &ExperimentConfig) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let d = rows.first().map_or(0, Vec::len);
    let levels = cfg.qwpt_levels.min(d.saturating_sub(1)).max(1);
    let qcfg = QwptConfig::new(d, levels).with_rz_phase(cfg.qwpt_rz);
    rows.par_iter()
        .map(|r| {
            let w = run_qwpt(&EncodedSample::product_ry(r)?, &qcfg)?;
            let mut row: Vec<f64> =
                (0..d).map(|q| w.f.iter().enumerate().filter(|(i, _)| i >> q & 1 == 1).map(|(_, p)| p).sum()).collect();
            row.extend_from_slice(&w.energies);
            row.push(w.wpee);
            Ok((row, w.energies))
        })
        .collect()
}

/// Scales with train statistics, extracts the configured features and
/// reduces them to `cfg.qubits` columns scaled into [0, feature_scale].
pub fn extract_features(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<Features> {
    let scaler = MinMaxScaler::fit(&train.x)?;
    let (xtr, xte) = (scaler.transform(&train.x)?, scaler.transform(&test.x)?);
    let (ftr, fte) = match cfg.feature_source {
        FeatureSource::Pca => (xtr, xte),
        FeatureSource::Qwpt | FeatureSource::QwptMarkers => {
            let tr = qwpt_rows(&xtr, cfg)?;
            let te = qwpt_rows(&xte, cfg)?;
            if cfg.feature_source == FeatureSource::Qwpt {
                (tr.into_iter().map(|r| r.0).collect(), te.into_iter().map(|r| r.0).collect())
            } else {
                let benign: Vec<Vec<f64>> = tr
                    .iter()
                    .zip(&train.y)
                    .filter(|(_, &y)| y < 0.0)
                    .map(|(r, _)| relative_energies(&r.1))
                    .collect::<Result<_>>()?;
                let profile = SubbandProfile::fit(&benign)?;
                let with = |rows: Vec<(Vec<f64>, Vec<f64>)>| -> Result<Matrix> {
                    rows.into_iter()
                        .map(|(row, e)| {
                            let m = profile.markers(&relative_energies(&e)?, cfg.alpha)?;
                            crate::behave::append_markers(&row, &m)
                        })
                        .collect()
                };
                (with(tr)?, with(te)?)
            }
        }
    };
    let raw_dim = ftr.first().map_or(0, Vec::len);
    if raw_dim < cfg.qubits {
        return Err(Error::Config(format!("{raw_dim} features cannot fill {} qubits", cfg.qubits)));
    }
    let (rtr, rte) = if raw_dim > cfg.qubits || cfg.feature_source == FeatureSource::Pca {
        let model = pca_fit(&ftr, cfg.qubits)?;
        if model.k() < cfg.qubits {
            return Err(Error::Config(format!("feature rank {} is below {} qubits", model.k(), cfg.qubits)));
        }
        (model.transform(&ftr)?, model.transform(&fte)?)
    } else {
        (ftr, fte)
    };
    let out_scaler = MinMaxScaler::fit(&rtr)?;
    let s = cfg.feature_scale;
    let scale = |m: Matrix| -> Matrix { m.into_iter().map(|r| r.into_iter().map(|v| v * s).collect()).collect() };
    Ok(Features { train: scale(out_scaler.transform(&rtr)?), test: scale(out_scaler.transform(&rte)?), raw_dim })
}

/// Kernel estimation mode for the cell's noise regime.
pub fn kernel_mode(cfg: &ExperimentConfig) -> Result<KernelMode> {
    let seed = mix_seed(cfg.seed, 3, 0);
    Ok(match cfg.noise.model()? {
        None if cfg.ideal_shots == 0 => KernelMode::Exact,
        None => KernelMode::Shots { shots: cfg.ideal_shots, noise: None, seed },
        Some(m) => KernelMode::Shots { shots: cfg.shots, noise: Some(m), seed },
    })
}

fn classical_gram(spec: KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| match spec {
                    KernelSpec::Rbf { gamma } => rbf(x, y, gamma),
                    _ => linalg::dot(x, y),
                })
                .collect()
        })
        .collect()
}

/// Trained-kernel artifacts of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTraining {
    pub theta0: Vec<f64>,
    pub theta: Vec<f64>,
    pub trace: SpsaTrace,
    /// Exact training svc_loss at theta0 and at the returned theta.
    pub loss_initial: f64,
    pub loss_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub name: String,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    pub n_train: usize,
    pub n_test: usize,
    pub train_kernel: Matrix,
    pub kernel_header: Vec<String>,
    pub repair_frobenius: f64,
    pub training: Option<KernelTraining>,
    pub penalty: Option<NoisePenaltyReport>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(&'static str, f64)>,
}

/// Runs one cell on a prepared dataset. Nothing is written to disk.
pub fn run_cell(cfg: &ExperimentConfig, ds: &Dataset, name: &str) -> StageResult<CellResult> {
    cfg.validate().stage("config")?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((stage, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let (train, test) = split_dataset(cfg, ds).stage("split")?;
    lap("split", &mut timings);
    let feats = extract_features(cfg, &train, &test).stage("features")?;
    lap("features", &mut timings);
    let mode = kernel_mode(cfg).stage("kernel")?;
    let mut training = None;
    let mut penalty = None;
    let (train_kernel, cross, header, repair_frobenius) = match cfg.kernel.feature_map(cfg.qubits) {
        Some(mut map) => {
            if let KernelSpec::Trainable { .. } = cfg.kernel {
                let (t, p) = train_kernel_params(cfg, &map, &feats, &train.y, &test.y, mode).stage("spsa")?;
                map = map.with_theta(&t.theta).stage("spsa")?;
                training = Some(t);
                penalty = p;
                lap("spsa", &mut timings);
            }
            let mut k = kernel_matrix(&map, &feats.train, mode).stage("kernel")?;
            let frob = k.repair().stage("kernel")?;
            let cross = cross_kernel(&map, &feats.test, &feats.train, mode).stage("kernel")?;
            let header = vec![format!("map={}", map), format!("mode={mode:?}"), format!("repair_frobenius={frob}")];
            (k.values, cross, header, frob)
        }
        None => {
            let k = classical_gram(cfg.kernel, &feats.train, &feats.train);
            let (k, frob) = psd_repair(&k).stage("kernel")?;
            let cross = classical_gram(cfg.kernel, &feats.test, &feats.train);
            (k, cross, vec![format!("kernel={}", cfg.kernel), format!("repair_frobenius={frob}")], frob)
        }
    };
    lap("kernel", &mut timings);
    let model = train_dual(&train_kernel, &train.y, cfg.c).stage("train")?;
    lap("train", &mut timings);
    let predictions = model.predict_all(&cross).stage("evaluate")?;
    let metrics = evaluate(&predictions, &test.y).stage("evaluate")?;
    lap("evaluate", &mut timings);
    Ok(CellResult {
        name: name.to_string(),
        config: cfg.clone(),
        metrics,
        n_train: train.len(),
        n_test: test.len(),
        train_kernel,
        kernel_header: header,
        repair_frobenius,
        training,
        penalty,
        timings,
    })
}

/// SPSA on the exact training svc_loss from theta = 0. Under a noisy
/// regime the testing loss of every iterate is also recorded clean and
/// noisy, giving the noise-penalty series.
fn train_kernel_params(
    cfg: &ExperimentConfig,
    map: &FeatureMap,
    feats: &Features,
    y_train: &[f64],
    y_test: &[f64],
    mode: KernelMode,
) -> Result<(KernelTraining, Option<NoisePenaltyReport>)> {
    let theta0 = vec![0.0; cfg.qubits];
    let loss = |t: &[f64]| svc_loss(t, &feats.train, y_train, map, cfg.c);
    let spsa_cfg = crate::spsa::SpsaConfig { seed: mix_seed(cfg.seed, 4, 0), ..cfg.spsa };
    let (theta, trace) = spsa_minimize(loss, &theta0, &spsa_cfg)?;
    let loss_initial = loss(&theta0)?;
    let loss_final = loss(&theta)?;
    let penalty = match mode {
        KernelMode::Shots { noise: Some(_), .. } => {
            let mut clean = Vec::with_capacity(trace.len());
            let mut noisy = Vec::with_capacity(trace.len());
            for (k, step) in trace.steps.iter().enumerate() {
                clean.push(svc_loss(&step.theta, &feats.test, y_test, map, cfg.c)?);
                let paired = match mode {
                    KernelMode::Shots { shots, noise, seed } => {
                        KernelMode::Shots { shots, noise, seed: mix_seed(seed, 5, k as u64) }
                    }
                    m => m,
                };
                noisy.push(svc_loss_in(&step.theta, &feats.test, y_test, map, cfg.c, paired)?);
            }
            Some(noise_penalty(&clean, &noisy)?)
        }
        _ => None,
    };
    best_of_trace(&trace)?;
    Ok((KernelTraining { theta0, theta, trace, loss_initial, loss_final }, penalty))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `kernel_<cell>.csv`, `spsa_trace_<cell>.csv` and
/// `noise_penalty_<cell>.csv` (the last two when present).
pub fn write_cell_artifacts(cell: &CellResult, dir: &Path) -> Result<()> {
    let mut w = create(dir, &format!("kernel_{}.csv", cell.name))?;
    for h in &cell.kernel_header {
        writeln!(w, "# {h}")?;
    }
    for row in &cell.train_kernel {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    if let Some(t) = &cell.training {
        let mut w = create(dir, &format!("spsa_trace_{}.csv", cell.name))?;
        t.trace.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &cell.penalty {
        let mut w = create(dir, &format!("noise_penalty_{}.csv", cell.name))?;
        p.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub const METRICS_HEADER: &str = "cell,feature_source,qubits,kernel,noise,shots,n_train,n_test,accuracy,\
precision_normal,recall_normal,f1_normal,precision_anomalous,recall_anomalous,f1_anomalous,tn,fp,fn,tp,repair_frobenius";

pub fn metrics_row(cell: &CellResult) -> String {
    let m = &cell.metrics;
    let c = &cell.config;
    let shots = match kernel_mode(c) {
        Ok(KernelMode::Shots { shots, .. }) => shots,
        _ => 0,
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        cell.name,
        c.feature_source,
        c.qubits,
        c.kernel,
        c.noise,
        shots,
        cell.n_train,
        cell.n_test,
        m.accuracy,
        m.per_class[0].precision,
        m.per_class[0].recall,
        m.per_class[0].f1,
        m.per_class[1].precision,
        m.per_class[1].recall,
        m.per_class[1].f1,
        m.confusion[0][0],
        m.confusion[0][1],
        m.confusion[1][0],
        m.confusion[1][1],
        cell.repair_frobenius
    )
}

fn write_metrics(cells: &[CellResult], dir: &Path) -> Result<()> {
    let mut w = create(dir, "metrics.csv")?;
    writeln!(w, "{METRICS_HEADER}")?;
    for c in cells {
        writeln!(w, "{}", metrics_row(c))?;
    }
    w.flush()?;
    Ok(())
}

/// The resolved configuration plus per-cell stage timings. This is the
/// only artifact that varies between identical runs.
fn write_resolved(cfg: &ExperimentConfig, cells: &[CellResult], dir: &Path) -> Result<()> {
    let mut w = create(dir, "config_resolved.txt")?;
    write!(w, "{}", cfg.to_kv())?;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(w, "# written_unix_time = {stamp}")?;
    for c in cells {
        for (stage, secs) in &c.timings {
            writeln!(w, "# time.{}.{stage} = {secs:.6}", c.name)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> StageResult<()> {
    std::fs::create_dir_all(dir).map_err(Error::from).stage("output")
}

/// Runs a single cell and, when `out_dir` is given, writes its artifacts,
/// `metrics.csv` and `config_resolved.txt`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> StageResult<CellResult> {
    let ds = prepare_dataset(cfg, cfg.qubits).stage("preprocess")?;
    let cell = run_cell(cfg, &ds, "main")?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_cell_artifacts(&cell, dir).stage("output")?;
        write_metrics(std::slice::from_ref(&cell), dir).stage("output")?;
        write_resolved(cfg, std::slice::from_ref(&cell), dir).stage("output")?;
    }
    Ok(cell)
}

fn noisy_regime(cfg: &ExperimentConfig) -> NoiseRegime {
    match cfg.noise {
        NoiseRegime::Depolarizing(p) => NoiseRegime::Depolarizing(p),
        NoiseRegime::Ideal => NoiseRegime::Depolarizing(cfg.sweep_p),
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: Vec<(String, String)>,
    pub noiseless: f64,
    pub noisy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellResult>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let Some(first) = self.rows.first() else { return Ok(()) };
        let keys: Vec<&str> = first.label.iter().map(|(k, _)| k.as_str()).collect();
        writeln!(out, "{},noiseless_accuracy,noisy_accuracy", keys.join(","))?;
        for r in &self.rows {
            let vals: Vec<&str> = r.label.iter().map(|(_, v)| v.as_str()).collect();
            writeln!(out, "{},{},{}", vals.join(","), r.noiseless, r.noisy)?;
        }
        Ok(())
    }
}

/// Cell name, row label and configuration of one sweep row.
type SweepSetting = (String, Vec<(String, String)>, ExperimentConfig);

fn run_pairs(base: &ExperimentConfig, ds: &Dataset, settings: Vec<SweepSetting>) -> StageResult<SweepTable> {
    let jobs: Vec<(String, ExperimentConfig)> = settings
        .iter()
        .flat_map(|(name, _, cfg)| {
            let clean = ExperimentConfig { noise: NoiseRegime::Ideal, ..cfg.clone() };
            let noisy = ExperimentConfig { noise: noisy_regime(base), ..cfg.clone() };
            [(format!("{name}_noiseless"), clean), (format!("{name}_noisy"), noisy)]
        })
        .collect();
    let cells: Vec<CellResult> =
        jobs.par_iter().map(|(name, cfg)| run_cell(cfg, ds, name)).collect::<StageResult<_>>()?;
    let rows = settings
        .into_iter()
        .zip(cells.chunks(2))
        .map(|((_, label, _), pair)| SweepRow {
            label,
            noiseless: pair[0].metrics.accuracy,
            noisy: pair[1].metrics.accuracy,
        })
        .collect();
    Ok(SweepTable { rows, cells })
}

fn finish_sweep(base: &ExperimentConfig, table: &SweepTable, out_dir: Option<&Path>, file: &str) -> StageResult<()> {
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        for c in &table.cells {
            write_cell_artifacts(c, dir).stage("output")?;
        }
        write_metrics(&table.cells, dir).stage("output")?;
        let mut w = create(dir, file).stage("output")?;
        table.write_csv(&mut w).stage("output")?;
        w.flush().map_err(Error::from).stage("output")?;
        write_resolved(base, &table.cells, dir).stage("output")?;
    }
    Ok(())
}

pub const DEFAULT_QUBIT_SWEEP: [usize; 4] = [8, 10, 12, 15];

/// Noiseless and noisy accuracy per qubit count; PCA is re-fitted per
/// count. Writes `table_qubits.csv` next to the cell artifacts.
pub fn sweep_qubits(base: &ExperimentConfig, qubits: &[usize], out_dir: Option<&Path>) -> StageResult<SweepTable> {
    let max_q = qubits.iter().copied().max().unwrap_or(base.qubits);
    let ds = prepare_dataset(base, max_q).stage("preprocess")?;
    let settings = qubits
        .iter()
        .map(|&q| {
            (
                format!("q{q}"),
                vec![("qubits".to_string(), q.to_string())],
                ExperimentConfig { qubits: q, ..base.clone() },
            )
        })
        .collect();
    let table = run_pairs(base, &ds, settings)?;
    finish_sweep(base, &table, out_dir, "table_qubits.csv")?;
    Ok(table)
}

/// (perturbation, learning rate, iterations)
pub const DEFAULT_KERNEL_SETTINGS: [(f64, f64, usize); 3] = [(0.05, 0.05, 10), (0.05, 0.5, 10), (0.05, 1.0, 10)];

/// Trainable-kernel accuracy per SPSA setting. Writes `table_kernel.csv`.
pub fn sweep_kernel_settings(
    base: &ExperimentConfig,
    settings: &[(f64, f64, usize)],
    out_dir: Option<&Path>,
) -> StageResult<SweepTable> {
    let reps = match base.kernel {
        KernelSpec::Zz { reps } | KernelSpec::Trainable { reps } => reps,
        _ => crate::qkernel::DEFAULT_REPS,
    };
    let ds = prepare_dataset(base, base.qubits).stage("preprocess")?;
    let cells = settings
        .iter()
        .enumerate()
        .map(|(i, &(pr, lr, iters))| {
            let mut cfg = ExperimentConfig { kernel: KernelSpec::Trainable { reps }, ..base.clone() };
            cfg.spsa.perturbation = pr;
            cfg.spsa.learning_rate = lr;
            cfg.spsa.iterations = iters;
            let label = vec![
                ("perturbation".to_string(), pr.to_string()),
                ("learning_rate".to_string(), lr.to_string()),
                ("iterations".to_string(), iters.to_string()),
            ];
            (format!("s{i}"), label, cfg)
        })
        .collect();
    let table = run_pairs(base, &ds, cells)?;
    finish_sweep(base, &table, out_dir, "table_kernel.csv")?;
    Ok(table)
}
