use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qkernel::{FeatureMap, DEFAULT_REPS};
use crate::qsim::{NoiseModel, DEFAULT_DEPOLARIZING_P};
use crate::spsa::SpsaConfig;
use crate::svm::DEFAULT_C;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { n: usize, dim: usize, anomaly_frac: f64 },
    Csv { path: PathBuf, label_column: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    Pca,
    Qwpt,
    QwptMarkers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Zz {
        reps: usize,
    },
    Phase,
    Trainable {
        reps: usize,
    },
    /// Classical baselines.
    Linear,
    Rbf {
        gamma: f64,
    },
}

impl KernelSpec {
    pub fn is_quantum(&self) -> bool {
        matches!(self, Self::Zz { .. } | Self::Phase | Self::Trainable { .. })
    }

    pub fn feature_map(&self, n_qubits: usize) -> Option<FeatureMap> {
        match *self {
            Self::Zz { reps } => Some(FeatureMap::zz(n_qubits, reps)),
            Self::Phase => Some(FeatureMap::phase(n_qubits)),
            Self::Trainable { reps } => Some(FeatureMap::trainable(vec![0.0; n_qubits], reps)),
            Self::Linear | Self::Rbf { .. } => None,
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pca => "pca",
            Self::Qwpt => "qwpt",
            Self::QwptMarkers => "qwpt_markers",
        })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zz { reps } => write!(f, "zz(reps={reps})"),
            Self::Phase => write!(f, "phase"),
            Self::Trainable { reps } => write!(f, "trainable(reps={reps})"),
            Self::Linear => write!(f, "linear"),
            Self::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseRegime {
    Ideal,
    Depolarizing(f64),
}

impl NoiseRegime {
    /// Channel applied during kernel estimation; a zero-probability channel
    /// resolves to the ideal path.
    pub fn model(&self) -> Result<Option<NoiseModel>> {
        match *self {
            Self::Ideal => Ok(None),
            Self::Depolarizing(p) => {
                let m = NoiseModel::depolarizing(p)?;
                Ok(if m.is_noiseless() { None } else { Some(m) })
            }
        }
    }
}

impl fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ideal => write!(f, "ideal"),
            Self::Depolarizing(p) => write!(f, "depolarizing({p})"),
        }
    }
}

/// One experiment cell. Every field has a `key = value` spelling.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub feature_source: FeatureSource,
    pub qubits: usize,
    pub kernel: KernelSpec,
    pub noise: NoiseRegime,
    /// Depolarizing probability used by sweeps for their noisy column.
    pub sweep_p: f64,
    /// Shots per kernel entry under noise.
    pub shots: u64,
    /// Shots per kernel entry without noise; 0 uses exact statevectors.
    pub ideal_shots: u64,
    pub c: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub stratified: bool,
    pub seed: u64,
    pub spsa: SpsaConfig,
    pub qwpt_levels: usize,
    pub qwpt_rz: bool,
    /// Significance level of the per-sample goodness-of-fit marker.
    pub alpha: f64,
    /// Multiplier applied to the [0, 1]-scaled kernel inputs.
    pub feature_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic { n: 150, dim: 0, anomaly_frac: 0.5 },
            feature_source: FeatureSource::Pca,
            qubits: 8,
            kernel: KernelSpec::Zz { reps: DEFAULT_REPS },
            noise: NoiseRegime::Ideal,
            sweep_p: DEFAULT_DEPOLARIZING_P,
            shots: 1024,
            ideal_shots: 0,
            c: DEFAULT_C,
            train_size: 120,
            test_size: 30,
            stratified: true,
            seed: 0,
            spsa: SpsaConfig::default(),
            qwpt_levels: 2,
            qwpt_rz: true,
            alpha: crate::behave::DEFAULT_ALPHA,
            feature_scale: 0.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 28] = [
        "data",
        "label_column",
        "synth_n",
        "synth_dim",
        "anomaly_frac",
        "feature_source",
        "qubits",
        "kernel",
        "reps",
        "gamma",
        "noise",
        "p",
        "shots",
        "ideal_shots",
        "c",
        "train_size",
        "test_size",
        "stratified",
        "seed",
        "spsa_pr",
        "spsa_lr",
        "spsa_iter",
        "spsa_alpha_gain",
        "spsa_gamma_gain",
        "qwpt_levels",
        "qwpt_rz",
        "alpha",
        "feature_scale",
    ];

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "data" => {
                self.data = if value == "synthetic" {
                    match &self.data {
                        DataSource::Synthetic { .. } => self.data.clone(),
                        DataSource::Csv { .. } => DataSource::Synthetic { n: 150, dim: 0, anomaly_frac: 0.5 },
                    }
                } else {
                    let label_column = match &self.data {
                        DataSource::Csv { label_column, .. } => label_column.clone(),
                        DataSource::Synthetic { .. } => "label".into(),
                    };
                    DataSource::Csv { path: PathBuf::from(value), label_column }
                }
            }
            "label_column" => match &mut self.data {
                DataSource::Csv { label_column, .. } => *label_column = value.to_string(),
                DataSource::Synthetic { .. } => {
                    return Err(Error::Config("label_column needs data = <csv path> first".into()))
                }
            },
            k @ ("synth_n" | "synth_dim" | "anomaly_frac") => match &mut self.data {
                DataSource::Synthetic { n, dim, anomaly_frac } => match k {
                    "synth_n" => *n = parse(k, value)?,
                    "synth_dim" => *dim = parse(k, value)?,
                    _ => *anomaly_frac = parse(k, value)?,
                },
                DataSource::Csv { .. } => return Err(Error::Config(format!("'{k}' applies to synthetic data only"))),
            },
            "feature_source" => {
                self.feature_source = match value {
                    "pca" => FeatureSource::Pca,
                    "qwpt" => FeatureSource::Qwpt,
                    "qwpt_markers" | "qwpt+markers" => FeatureSource::QwptMarkers,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown feature source '{value}' (pca, qwpt, qwpt_markers)"
                        )))
                    }
                }
            }
            "qubits" => self.qubits = parse("qubits", value)?,
            "kernel" => {
                let reps = self.reps().unwrap_or(DEFAULT_REPS);
                self.kernel = match value {
                    "zz" => KernelSpec::Zz { reps },
                    "phase" => KernelSpec::Phase,
                    "trainable" => KernelSpec::Trainable { reps },
                    "linear" => KernelSpec::Linear,
                    "rbf" => KernelSpec::Rbf { gamma: self.gamma().unwrap_or(1.0) },
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown kernel '{value}' (zz, phase, trainable, linear, rbf)"
                        )))
                    }
                }
            }
            "reps" => {
                let r: usize = parse("reps", value)?;
                match &mut self.kernel {
                    KernelSpec::Zz { reps } | KernelSpec::Trainable { reps } => *reps = r,
                    _ => return Err(Error::Config("reps applies to the zz and trainable kernels".into())),
                }
            }
            "gamma" => match &mut self.kernel {
                KernelSpec::Rbf { gamma } => *gamma = parse("gamma", value)?,
                _ => return Err(Error::Config("gamma applies to the rbf kernel".into())),
            },
            "noise" => {
                self.noise = match value {
                    "ideal" => NoiseRegime::Ideal,
                    "depolarizing" => NoiseRegime::Depolarizing(self.sweep_p),
                    _ => return Err(Error::Config(format!("unknown noise regime '{value}' (ideal, depolarizing)"))),
                }
            }
            "p" => {
                let p: f64 = parse("p", value)?;
                self.sweep_p = p;
                if let NoiseRegime::Depolarizing(q) = &mut self.noise {
                    *q = p;
                }
            }
            "shots" => self.shots = parse("shots", value)?,
            "ideal_shots" => self.ideal_shots = parse("ideal_shots", value)?,
            "c" => self.c = parse("c", value)?,
            "train_size" => self.train_size = parse("train_size", value)?,
            "test_size" => self.test_size = parse("test_size", value)?,
            "stratified" => self.stratified = parse_bool("stratified", value)?,
            "seed" => self.seed = parse("seed", value)?,
            "spsa_pr" => self.spsa.perturbation = parse("spsa_pr", value)?,
            "spsa_lr" => self.spsa.learning_rate = parse("spsa_lr", value)?,
            "spsa_iter" => self.spsa.iterations = parse("spsa_iter", value)?,
            "spsa_alpha_gain" => self.spsa.alpha_gain = parse("spsa_alpha_gain", value)?,
            "spsa_gamma_gain" => self.spsa.gamma_gain = parse("spsa_gamma_gain", value)?,
            "qwpt_levels" => self.qwpt_levels = parse("qwpt_levels", value)?,
            "qwpt_rz" => self.qwpt_rz = parse_bool("qwpt_rz", value)?,
            "alpha" => self.alpha = parse("alpha", value)?,
            "feature_scale" => self.feature_scale = parse("feature_scale", value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn reps(&self) -> Option<usize> {
        match self.kernel {
            KernelSpec::Zz { reps } | KernelSpec::Trainable { reps } => Some(reps),
            _ => None,
        }
    }

    fn gamma(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Rbf { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// Applies `key = value` lines; `#` starts a comment. Keys are applied
    /// in file order, so `data` should precede `label_column`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 || self.qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::Config(format!("qubits = {} outside 1..={}", self.qubits, crate::qsim::MAX_QUBITS)));
        }
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::Config(format!("c = {} must be positive", self.c)));
        }
        if self.test_size == 0 || self.train_size < 2 {
            return Err(Error::Config("need test_size >= 1 and train_size >= 2".into()));
        }
        if let NoiseRegime::Depolarizing(p) = self.noise {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p = {p} outside [0, 1]")));
            }
        }
        if self.noise.model()?.is_some() && self.shots == 0 {
            return Err(Error::Config("noisy kernels need shots > 0".into()));
        }
        if !(self.feature_scale > 0.0 && self.feature_scale.is_finite()) {
            return Err(Error::Config(format!("feature_scale = {} must be positive", self.feature_scale)));
        }
        if matches!(self.kernel, KernelSpec::Zz { reps: 0 } | KernelSpec::Trainable { reps: 0 }) {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        Ok(())
    }

    /// Fully resolved settings as `key = value` lines, readable by [`Self::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        match &self.data {
            DataSource::Synthetic { n, dim, anomaly_frac } => {
                put("data", "synthetic".into());
                put("synth_n", n.to_string());
                put("synth_dim", dim.to_string());
                put("anomaly_frac", anomaly_frac.to_string());
            }
            DataSource::Csv { path, label_column } => {
                put("data", path.display().to_string());
                put("label_column", label_column.clone());
            }
        }
        put("feature_source", self.feature_source.to_string());
        put("qubits", self.qubits.to_string());
        match self.kernel {
            KernelSpec::Zz { reps } => {
                put("kernel", "zz".into());
                put("reps", reps.to_string());
            }
            KernelSpec::Phase => put("kernel", "phase".into()),
            KernelSpec::Trainable { reps } => {
                put("kernel", "trainable".into());
                put("reps", reps.to_string());
            }
            KernelSpec::Linear => put("kernel", "linear".into()),
            KernelSpec::Rbf { gamma } => {
                put("kernel", "rbf".into());
                put("gamma", gamma.to_string());
            }
        }
        put("p", self.sweep_p.to_string());
        match self.noise {
            NoiseRegime::Ideal => put("noise", "ideal".into()),
            NoiseRegime::Depolarizing(p) => {
                put("noise", "depolarizing".into());
                put("p", p.to_string());
            }
        }
        put("shots", self.shots.to_string());
        put("ideal_shots", self.ideal_shots.to_string());
        put("c", self.c.to_string());
        put("train_size", self.train_size.to_string());
        put("test_size", self.test_size.to_string());
        put("stratified", self.stratified.to_string());
        put("seed", self.seed.to_string());
        put("spsa_pr", self.spsa.perturbation.to_string());
        put("spsa_lr", self.spsa.learning_rate.to_string());
        put("spsa_iter", self.spsa.iterations.to_string());
        put("spsa_alpha_gain", self.spsa.alpha_gain.to_string());
        put("spsa_gamma_gain", self.spsa.gamma_gain.to_string());
        put("qwpt_levels", self.qwpt_levels.to_string());
        put("qwpt_rz", self.qwpt_rz.to_string());
        put("alpha", self.alpha.to_string());
        put("feature_scale", self.feature_scale.to_string());
        out
    }
}
