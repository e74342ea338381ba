use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwave::pipeline::{
    self, extract_features, kernel_mode, noise_penalty, prepare_dataset, split_dataset, synthetic_dataset,
    ExperimentConfig, KernelSpec, NoiseRegime, StageError, SynthConfig,
};
use qwave::qkernel::{kernel_matrix, KernelMode};
use qwave::qwpt::{validate_qwpt_against_classical, QwptConfig};
use qwave::svm::{evaluate, Metrics};
use qwave::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hybrid quantum-classical intrusion detection on a simulated quantum
/// processor. Every subcommand runs on generated synthetic data unless
/// `--data` points at a CSV file.
#[derive(Debug, Parser)]
#[command(name = "qwave", version)]
struct Cli {
    /// Master seed for data generation, splits, shot sampling and SPSA.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for all artifacts.
    #[arg(long, global = true, env = "QWAVE_OUT_DIR", default_value = "qwave-out")]
    out_dir: PathBuf,

    /// Experiment configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for kernel entries and sweep cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load (or generate) the dataset, impute missing values and write `preprocessed.csv`.
    Preprocess(ExperimentArgs),
    /// Split and extract kernel-ready features into `features_train.csv` / `features_test.csv`.
    Features(ExperimentArgs),
    /// Compute the training Gram matrix into `kernel_main.csv`.
    Kernel(ExperimentArgs),
    /// Run one full experiment cell and write its artifacts.
    Train(ExperimentArgs),
    /// Print a classification report, from a predictions file or a fresh experiment.
    Evaluate(EvaluateArgs),
    /// Noiseless and noisy accuracy across qubit counts (`table_qubits.csv`).
    SweepQubits(SweepQubitsArgs),
    /// Trainable-kernel accuracy across SPSA settings (`table_kernel.csv`).
    SweepKernel(SweepKernelArgs),
    /// Compare the circuit transform with the classical Haar packet transform.
    ValidateQwpt(ValidateArgs),
    /// Clean versus noisy testing-loss series of a trained kernel (`noise_penalty_*.csv`).
    NoiseReport(NoiseReportArgs),
    /// Write a seeded synthetic dataset as CSV.
    SynthData(SynthArgs),
}

/// Experiment settings. Precedence: defaults, then `--config`, then `--set`,
/// then the dedicated flags below.
#[derive(Debug, Args, Clone, Default)]
struct ExperimentArgs {
    /// Override any configuration key, e.g. `--set shots=2048`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// CSV input instead of synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Label column of the CSV input [default: label].
    #[arg(long)]
    label_column: Option<String>,

    /// Qubit count (kernel input dimension) [default: 8].
    #[arg(long)]
    qubits: Option<usize>,

    /// Feature source: pca, qwpt or qwpt_markers [default: pca].
    #[arg(long)]
    feature_source: Option<String>,

    /// Kernel: zz, phase, trainable, linear or rbf [default: zz].
    #[arg(long)]
    kernel: Option<String>,

    /// Noise regime: ideal or depolarizing [default: ideal].
    #[arg(long)]
    noise: Option<String>,

    /// Depolarizing probability [default: 0.01].
    #[arg(long)]
    p: Option<f64>,

    /// Shots per kernel entry under noise [default: 1024].
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// CSV with `prediction,truth` columns (labels -1 / +1). Without it a
    /// fresh experiment is run.
    #[arg(long)]
    predictions: Option<PathBuf>,

    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args)]
struct SweepQubitsArgs {
    /// Comma-separated qubit counts.
    #[arg(long, value_delimiter = ',', default_value = "8,10,12,15")]
    qubits_list: Vec<usize>,

    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args)]
struct SweepKernelArgs {
    /// SPSA perturbation. Giving --pr, --lr and --iter runs that single
    /// setting instead of the default three.
    #[arg(long, requires_all = ["lr", "iter"])]
    pr: Option<f64>,

    /// SPSA learning rate.
    #[arg(long, requires_all = ["pr", "iter"])]
    lr: Option<f64>,

    /// SPSA iterations.
    #[arg(long, requires_all = ["pr", "lr"])]
    iter: Option<usize>,

    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Number of random samples.
    #[arg(long, default_value_t = 100)]
    samples: usize,

    /// Sample length (a power of two).
    #[arg(long, default_value_t = 8)]
    dim: usize,

    /// Decomposition levels [default: log2(dim) - 1].
    #[arg(long)]
    levels: Option<usize>,

    /// Pass threshold on the mean l2 error.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct NoiseReportArgs {
    /// CSV with `clean,noisy` loss columns. Without it a trainable-kernel
    /// experiment is run under depolarizing noise.
    #[arg(long)]
    series: Option<PathBuf>,

    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 150)]
    n: usize,

    #[arg(long, default_value_t = 8)]
    dim: usize,

    #[arg(long, default_value_t = 0.5)]
    anomaly_frac: f64,

    /// Output file [default: <out-dir>/synthetic.csv].
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure with the stage it happened in.
struct Failure {
    stage: &'static str,
    error: Error,
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure { stage: e.stage, error: e.error }
    }
}

trait At<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> At<T> for Result<T, E> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure { stage, error: e.into() })
    }
}

type CliResult = Result<(), Failure>;

fn resolve(global: &Cli, args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &global.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
            .at("config")?;
        cfg.apply_kv(&text).at("config")?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))
            .at("config")?;
        cfg.set(k, v).at("config")?;
    }
    let mut set = |k: &str, v: Option<String>| -> CliResult {
        if let Some(v) = v {
            cfg.set(k, &v).at("config")?;
        }
        Ok(())
    };
    set("data", args.data.as_ref().map(|p| p.display().to_string()))?;
    set("label_column", args.label_column.clone())?;
    set("qubits", args.qubits.map(|v| v.to_string()))?;
    set("feature_source", args.feature_source.clone())?;
    set("kernel", args.kernel.clone())?;
    set("noise", args.noise.clone())?;
    set("p", args.p.map(|v| v.to_string()))?;
    set("shots", args.shots.map(|v| v.to_string()))?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.validate().at("config")?;
    Ok(cfg)
}

fn out_dir(global: &Cli) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&global.out_dir).at("output")?;
    Ok(&global.out_dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).at("output")?))
}

fn write_rows(path: &Path, header: &str, rows: &[Vec<f64>], labels: &[f64]) -> CliResult {
    let mut w = create(path)?;
    writeln!(w, "{header}").at("output")?;
    for (r, y) in rows.iter().zip(labels) {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", cells.join(","), *y as i64).at("output")?;
    }
    w.flush().at("output")
}

fn print_report(m: &Metrics) {
    println!("accuracy {:.4}", m.accuracy);
    println!("class        precision  recall  f1      support");
    for (name, c) in ["normal", "anomalous"].iter().zip(&m.per_class) {
        println!("{name:<12} {:<10.4} {:<7.4} {:<7.4} {}", c.precision, c.recall, c.f1, c.support);
    }
    println!("confusion (rows truth, cols predicted; normal, anomalous)");
    for row in &m.confusion {
        println!("{} {}", row[0], row[1]);
    }
}

fn cmd_preprocess(global: &Cli, args: &ExperimentArgs) -> CliResult {
    let cfg = resolve(global, args)?;
    let ds = prepare_dataset(&cfg, cfg.qubits).at("preprocess")?;
    let path = out_dir(global)?.join("preprocessed.csv");
    ds.write_csv(&path).at("output")?;
    println!("{} rows, {} features ({} anomalous) -> {}", ds.len(), ds.n_features(), ds.count(1.0), path.display());
    Ok(())
}

fn cmd_features(global: &Cli, args: &ExperimentArgs) -> CliResult {
    let cfg = resolve(global, args)?;
    let ds = prepare_dataset(&cfg, cfg.qubits).at("preprocess")?;
    let (train, test) = split_dataset(&cfg, &ds).at("split")?;
    let f = extract_features(&cfg, &train, &test).at("features")?;
    let dir = out_dir(global)?;
    let header: Vec<String> = (0..cfg.qubits).map(|i| format!("x{i}")).chain(["label".to_string()]).collect();
    write_rows(&dir.join("features_train.csv"), &header.join(","), &f.train, &train.y)?;
    write_rows(&dir.join("features_test.csv"), &header.join(","), &f.test, &test.y)?;
    println!("{} train / {} test rows, {} raw features reduced to {}", train.len(), test.len(), f.raw_dim, cfg.qubits);
    Ok(())
}

fn cmd_kernel(global: &Cli, args: &ExperimentArgs) -> CliResult {
    let cfg = resolve(global, args)?;
    let map = cfg
        .kernel
        .feature_map(cfg.qubits)
        .ok_or_else(|| Error::Config(format!("'{}' is not a quantum kernel", cfg.kernel)))
        .at("config")?;
    let ds = prepare_dataset(&cfg, cfg.qubits).at("preprocess")?;
    let (train, test) = split_dataset(&cfg, &ds).at("split")?;
    let f = extract_features(&cfg, &train, &test).at("features")?;
    let mode = kernel_mode(&cfg).at("kernel")?;
    let k = kernel_matrix(&map, &f.train, mode).at("kernel")?;
    let path = out_dir(global)?.join("kernel_main.csv");
    let mut w = create(&path)?;
    k.write_csv(&mut w).at("output")?;
    w.flush().at("output")?;
    let min = qwave::linalg::min_eigenvalue(&k.values).at("kernel")?;
    println!("{}x{} kernel ({}), min eigenvalue {min:e} -> {}", k.len(), k.len(), map, path.display());
    Ok(())
}

fn cmd_train(global: &Cli, args: &ExperimentArgs) -> CliResult {
    let cfg = resolve(global, args)?;
    let cell = pipeline::run_experiment(&cfg, Some(out_dir(global)?))?;
    println!("accuracy {:.4} ({} train, {} test)", cell.metrics.accuracy, cell.n_train, cell.n_test);
    if let Some(t) = &cell.training {
        println!("svc_loss {:.6} -> {:.6}", t.loss_initial, t.loss_final);
    }
    println!("artifacts in {}", global.out_dir.display());
    Ok(())
}

fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let mut r = csv::Reader::from_path(path).map_err(Error::from).at("input")?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(Error::from).at("input")?;
        if rec.len() < 2 {
            return Err(Error::Config(format!("{}: expected two columns", path.display()))).at("input");
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Config(format!("{}: bad number '{s}'", path.display())))
        };
        a.push(parse(&rec[0]).at("input")?);
        b.push(parse(&rec[1]).at("input")?);
    }
    Ok((a, b))
}

fn cmd_evaluate(global: &Cli, args: &EvaluateArgs) -> CliResult {
    let metrics = match &args.predictions {
        Some(path) => {
            let (pred, truth) = read_pairs(path)?;
            evaluate(&pred, &truth).at("evaluate")?
        }
        None => {
            let cfg = resolve(global, &args.exp)?;
            pipeline::run_experiment(&cfg, None)?.metrics
        }
    };
    print_report(&metrics);
    Ok(())
}

fn print_table(table: &pipeline::SweepTable) -> CliResult {
    let mut out = std::io::stdout().lock();
    table.write_csv(&mut out).at("output")
}

fn cmd_sweep_qubits(global: &Cli, args: &SweepQubitsArgs) -> CliResult {
    let cfg = resolve(global, &args.exp)?;
    let table = pipeline::sweep_qubits(&cfg, &args.qubits_list, Some(out_dir(global)?))?;
    print_table(&table)
}

fn cmd_sweep_kernel(global: &Cli, args: &SweepKernelArgs) -> CliResult {
    let cfg = resolve(global, &args.exp)?;
    let settings = match (args.pr, args.lr, args.iter) {
        (Some(pr), Some(lr), Some(it)) => vec![(pr, lr, it)],
        _ => pipeline::DEFAULT_KERNEL_SETTINGS.to_vec(),
    };
    let table = pipeline::sweep_kernel_settings(&cfg, &settings, Some(out_dir(global)?))?;
    print_table(&table)
}

fn cmd_validate(global: &Cli, args: &ValidateArgs) -> CliResult {
    if args.dim < 4 || !args.dim.is_power_of_two() {
        return Err(Error::Config(format!("--dim {} must be a power of two >= 4", args.dim))).at("config");
    }
    let n = args.dim.trailing_zeros() as usize;
    let levels = args.levels.unwrap_or(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(0));
    let samples: Vec<Vec<f64>> =
        (0..args.samples).map(|_| (0..args.dim).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let cfg = QwptConfig::new(n, levels).with_rz_phase(false);
    let err = validate_qwpt_against_classical(&samples, &cfg).at("validate")?;
    println!("mean_l2_error {err:e} over {} samples ({} qubits, {levels} levels)", args.samples, n);
    if err < args.tolerance {
        Ok(())
    } else {
        Err(Error::Internal(format!("mean l2 error {err:e} exceeds {:e}", args.tolerance))).at("validate")
    }
}

fn cmd_noise_report(global: &Cli, args: &NoiseReportArgs) -> CliResult {
    let dir = out_dir(global)?;
    let report = match &args.series {
        Some(path) => {
            let (clean, noisy) = read_pairs(path)?;
            noise_penalty(&clean, &noisy).at("noise")?
        }
        None => {
            let mut cfg = resolve(global, &args.exp)?;
            if !matches!(cfg.kernel, KernelSpec::Trainable { .. }) {
                cfg.set("kernel", "trainable").at("config")?;
            }
            if cfg.noise == NoiseRegime::Ideal {
                cfg.noise = NoiseRegime::Depolarizing(cfg.sweep_p);
            }
            if !matches!(kernel_mode(&cfg).at("kernel")?, KernelMode::Shots { noise: Some(_), .. }) {
                return Err(Error::Config("noise report needs p > 0".into())).at("config");
            }
            let cell = pipeline::run_experiment(&cfg, Some(dir))?;
            cell.penalty
                .ok_or_else(|| Error::Internal("noisy trainable cell produced no penalty series".into()))
                .at("noise")?
        }
    };
    if args.series.is_some() {
        let mut w = create(&dir.join("noise_penalty_input.csv"))?;
        report.write_csv(&mut w).at("output")?;
        w.flush().at("output")?;
    }
    println!("a_noise {}", report.cumulative);
    for (t, d) in report.delta.iter().enumerate() {
        println!("delta[{t}] {d}");
    }
    Ok(())
}

fn cmd_synth(global: &Cli, args: &SynthArgs) -> CliResult {
    let cfg = SynthConfig { n: args.n, dim: args.dim, anomaly_frac: args.anomaly_frac, seed: global.seed.unwrap_or(0) };
    let ds = synthetic_dataset(&cfg).at("synth")?;
    let path = match &args.output {
        Some(p) => p.clone(),
        None => out_dir(global)?.join("synthetic.csv"),
    };
    ds.write_csv(&path).at("output")?;
    println!("{} rows ({} anomalous) -> {}", ds.len(), ds.count(1.0), path.display());
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))
            .at("setup")?;
    }
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(cli, a),
        Command::Features(a) => cmd_features(cli, a),
        Command::Kernel(a) => cmd_kernel(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::SweepQubits(a) => cmd_sweep_qubits(cli, a),
        Command::SweepKernel(a) => cmd_sweep_kernel(cli, a),
        Command::ValidateQwpt(a) => cmd_validate(cli, a),
        Command::NoiseReport(a) => cmd_noise_report(cli, a),
        Command::SynthData(a) => cmd_synth(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR cli: {first}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = f.error.to_string().replace('\n', " ");
            let msg = msg.strip_prefix(&format!("{}: ", f.stage)).unwrap_or(&msg);
            eprintln!("ERROR {}: {msg}", f.stage);
            match f.error {
                Error::Internal(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
