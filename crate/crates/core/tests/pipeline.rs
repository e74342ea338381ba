use std::io::Write;

use proptest::prelude::*;
use qwave::pipeline::*;
use qwave::svm::train_dual;
use qwave::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn write_file(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

#[test]
fn csv_keeps_numeric_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_file(&dir, "toy.csv", "proto,bytes,dur,attack\ntcp,10,0.5,1\nudp,20,,0\ntcp,30,1.5,1\n");
    let (ds, report) = load_csv(&p, "attack", &LabelMapping::default()).unwrap();
    assert_eq!(ds.feature_names, vec!["bytes", "dur"]);
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.y, vec![1.0, -1.0, 1.0]);
    assert!(ds.x[1][1].is_nan());
    assert_eq!(report.dropped_columns, vec!["proto"]);
    let (filled, counts) = fill_missing(&ds);
    assert_eq!(filled.x[1][1], 1.0);
    assert_eq!(counts, vec![0, 1]);
}

#[test]
fn csv_errors_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_file(&dir, "empty.csv", "");
    assert!(matches!(load_csv(&empty, "label", &LabelMapping::default()), Err(Error::Config(_))));
    let header_only = write_file(&dir, "h.csv", "a,label\n");
    assert!(matches!(load_csv(&header_only, "label", &LabelMapping::default()), Err(Error::Config(_))));
    let p = write_file(&dir, "x.csv", "a,label\n1,Benign\n2,Malicious\n3,weird\n");
    assert!(matches!(load_csv(&p, "attack", &LabelMapping::default()), Err(Error::Config(_))));
    let (ds, report) = load_csv(&p, "label", &LabelMapping::default()).unwrap();
    assert_eq!((ds.len(), report.rejected_rows), (2, 1));
}

#[test]
fn single_class_file_loads_but_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_file(&dir, "b.csv", "a,label\n1,0\n2,0\n");
    let (ds, _) = load_csv(&p, "label", &LabelMapping::default()).unwrap();
    let k = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
    assert!(train_dual(&k, &ds.y, 1.0).is_err());
}

#[test]
fn median_imputation() {
    let ds = Dataset {
        x: vec![vec![1.0, f64::NAN, 5.0], vec![f64::NAN, f64::NAN, 6.0], vec![3.0, f64::NAN, 7.0]],
        y: vec![1.0, -1.0, 1.0],
        feature_names: vec!["a".into(), "b".into(), "c".into()],
        provenance: String::new(),
    };
    let (out, counts) = fill_missing(&ds);
    assert_eq!(out.feature_names, vec!["a", "c"]);
    assert_eq!(out.x, vec![vec![1.0, 5.0], vec![2.0, 6.0], vec![3.0, 7.0]]);
    assert_eq!(counts, vec![1, 0]);
    assert_eq!(fill_missing(&out).0, out);
}

fn synth(n: usize, dim: usize, seed: u64) -> Dataset {
    synthetic_dataset(&SynthConfig { n, dim, anomaly_frac: 0.5, seed }).unwrap()
}

#[test]
fn stratified_split_is_balanced_and_deterministic() {
    let ds = synth(100, 3, 1);
    assert_eq!(ds.count(1.0), 50);
    let (tr, te) = split(&ds, 30, true, 9).unwrap();
    assert_eq!((te.count(1.0), te.count(-1.0)), (15, 15));
    assert_eq!(tr.len(), 70);
    assert_eq!(split(&ds, 30, true, 9).unwrap(), (tr, te));
    assert!(split(&ds, 100, true, 0).is_err());
    assert!(split(&ds, 0, false, 0).is_err());
    let skewed = synthetic_dataset(&SynthConfig { n: 97, dim: 2, anomaly_frac: 0.3, seed: 2 }).unwrap();
    let (_, te) = split(&skewed, 20, true, 3).unwrap();
    let want = 20.0 * skewed.count(1.0) as f64 / 97.0;
    assert!((te.count(1.0) as f64 - want).abs() <= 1.0);
}

#[test]
fn synthetic_generator_is_seeded() {
    assert_eq!(synth(40, 4, 5), synth(40, 4, 5));
    assert_ne!(synth(40, 4, 5).x, synth(40, 4, 6).x);
    assert!(synthetic_dataset(&SynthConfig { n: 10, dim: 0, anomaly_frac: 0.5, seed: 0 }).is_err());
}

#[test]
fn pca_on_a_line() {
    let x: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let t = i as f64 * 0.3 - 2.0;
            vec![1.0 + 2.0 * t, -t, 0.5 * t]
        })
        .collect();
    let m = pca_fit(&x, 1).unwrap();
    assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-10);
    let reduced = pca_fit(&x, 3).unwrap();
    assert_eq!(reduced.k(), 1);
}

#[test]
fn pca_full_rank_reconstructs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..15).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let (m, z) = pca_fit_transform(&x, 6).unwrap();
    let back = m.inverse_transform(&z);
    for (a, b) in x.iter().flatten().zip(back.iter().flatten()) {
        assert!((a - b).abs() < 1e-8);
    }
}

/// Power iteration with deflation on the covariance matrix.
fn power_components(x: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    let mut out = Vec::new();
    for c in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i * 7 + c) as f64 % 3.0).collect();
        let mut lambda = 0.0;
        for _ in 0..20000 {
            let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            v = w.iter().map(|a| a / norm).collect();
            lambda = norm;
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push(v);
    }
    out
}

#[test]
fn pca_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Distinct column scales keep the spectrum well separated.
    let x: Vec<Vec<f64>> =
        (0..20).map(|_| (0..10).map(|j| rng.random_range(-1.0..1.0) * (10.0 - j as f64)).collect()).collect();
    let m = pca_fit(&x, 5).unwrap();
    let oracle = power_components(&x, 5);
    let z = m.transform(&x).unwrap();
    for c in 0..5 {
        let sign =
            if oracle[c].iter().zip(&m.components[c]).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for (row, zr) in x.iter().zip(&z) {
            let proj: f64 = row.iter().zip(&m.mean).zip(&oracle[c]).map(|((a, mu), v)| (a - mu) * v).sum();
            assert!((zr[c] - sign * proj).abs() < 1e-8, "component {c}");
        }
        let pivot = m.components[c].iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(pivot > 0.0);
    }
}

#[test]
fn pca_rejects_too_few_rows() {
    assert!(pca_fit(&[vec![1.0, 2.0]], 1).is_err());
    assert!(pca_fit(&[vec![1.0], vec![2.0]], 2).is_err());
}

#[test]
fn penalty_examples() {
    let r = noise_penalty(&[1.0, 1.0, 1.0], &[0.0, 3.0, 4.0]).unwrap();
    assert_eq!(r.delta, vec![-1.0, 2.0, 3.0]);
    assert_eq!(r.cumulative, 5.0);
    assert_eq!(noise_penalty(&[1.0, 2.0], &[1.0, 2.0]).unwrap().cumulative, 0.0);
    assert_eq!(noise_penalty(&[3.0, 2.0], &[1.0, 1.0]).unwrap().cumulative, 0.0);
    assert!(noise_penalty(&[1.0], &[]).is_err());
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# a_noise=5\n"));
    assert_eq!(text.lines().count(), 5);
}

fn small_cfg(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_kv(
        "qubits = 4\nsynth_n = 50\ntrain_size = 34\ntest_size = 16\nshots = 128\nspsa_iter = 3\n",
    )
    .unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn config_round_trip_and_errors() {
    let mut cfg = small_cfg(3);
    cfg.set("kernel", "trainable").unwrap();
    cfg.set("noise", "depolarizing").unwrap();
    cfg.set("p", "0.02").unwrap();
    cfg.set("feature_source", "qwpt_markers").unwrap();
    assert_eq!(ExperimentConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
    assert!(matches!(cfg.set("colour", "red"), Err(Error::Config(_))));
    assert!(cfg.set("qubits", "many").is_err());
    assert!(ExperimentConfig::from_kv("qubits 4").is_err());
    assert!(cfg.set("gamma", "1").is_err());
    assert!(ExperimentConfig::from_kv("# only a comment\n\n").is_ok());
}

#[test]
fn experiment_is_deterministic() {
    for source in ["pca", "qwpt", "qwpt_markers"] {
        let mut cfg = small_cfg(11);
        cfg.set("feature_source", source).unwrap();
        cfg.set("noise", "depolarizing").unwrap();
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&cfg, None).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.train_kernel, b.train_kernel);
    }
}

#[test]
fn zero_noise_matches_ideal() {
    for kernel in ["zz", "phase", "trainable", "linear"] {
        let mut ideal = small_cfg(5);
        ideal.set("kernel", kernel).unwrap();
        let mut zero = ideal.clone();
        zero.noise = NoiseRegime::Depolarizing(0.0);
        let a = run_experiment(&ideal, None).unwrap();
        let b = run_experiment(&zero, None).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.train_kernel, b.train_kernel);
        ideal.ideal_shots = 64;
        zero.ideal_shots = 64;
        assert_eq!(
            run_experiment(&ideal, None).unwrap().train_kernel,
            run_experiment(&zero, None).unwrap().train_kernel
        );
    }
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(2);
    cfg.set("kernel", "trainable").unwrap();
    cfg.set("noise", "depolarizing").unwrap();
    let cell = run_experiment(&cfg, Some(dir.path())).unwrap();
    for f in ["metrics.csv", "kernel_main.csv", "spsa_trace_main.csv", "noise_penalty_main.csv", "config_resolved.txt"]
    {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert_eq!(metrics.lines().nth(1).unwrap().split(',').count(), METRICS_HEADER.split(',').count());
    let penalty = cell.penalty.unwrap();
    assert_eq!(penalty.delta.len(), 3);
    assert!(penalty.cumulative >= 0.0);
    let resolved = std::fs::read_to_string(dir.path().join("config_resolved.txt")).unwrap();
    assert!(resolved.contains("kernel = trainable"));
}

#[test]
fn stage_errors_name_the_stage() {
    let mut cfg = small_cfg(0);
    cfg.set("synth_dim", "4").unwrap();
    cfg.qubits = 5;
    let stage = |c: &ExperimentConfig| run_experiment(c, None).err().map(|e| e.stage);
    assert_eq!(stage(&cfg), Some("features"));
    cfg.qubits = 4;
    cfg.test_size = 100;
    assert_eq!(stage(&cfg), Some("split"));
}

#[test]
fn sweep_tables_have_the_expected_shape() {
    let mut base = small_cfg(1);
    base.sweep_p = 0.0;
    let t = sweep_qubits(&base, &[2, 3], None).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.cells.len(), 4);
    for r in &t.rows {
        assert_eq!(r.noiseless, r.noisy);
    }
    let k = sweep_kernel_settings(&base, &[(0.05, 0.05, 2), (0.05, 0.5, 2)], None).unwrap();
    assert_eq!(k.rows.len(), 2);
    let mut buf = Vec::new();
    k.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "perturbation,learning_rate,iterations,noiseless_accuracy,noisy_accuracy");
    assert!(k.cells.iter().all(|c| c.training.is_some()));
}

#[test]
fn noise_does_not_help_on_average() {
    let mut clean = 0.0;
    let mut noisy = 0.0;
    for seed in 0..10 {
        let mut cfg = small_cfg(seed);
        cfg.shots = 256;
        clean += run_experiment(&cfg, None).unwrap().metrics.accuracy;
        cfg.noise = NoiseRegime::Depolarizing(0.05);
        noisy += run_experiment(&cfg, None).unwrap().metrics.accuracy;
    }
    assert!(noisy <= clean, "noisy {noisy} vs clean {clean}");
}

proptest! {
    #[test]
    fn pca_components_orthonormal(seed in any::<u64>(), n in 6usize..20, d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let m = pca_fit(&x, d.min(n)).unwrap();
        for a in 0..m.k() {
            for b in 0..m.k() {
                let dot: f64 = m.components[a].iter().zip(&m.components[b]).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn penalty_additive_and_nonnegative(a in prop::collection::vec(-5.0f64..5.0, 0..20), b in prop::collection::vec(-5.0f64..5.0, 0..20)) {
        let n = a.len().min(b.len());
        let (c, d) = (&a[..n], &b[..n]);
        let whole = noise_penalty(c, d).unwrap();
        prop_assert!(whole.cumulative >= 0.0);
        let k = n / 2;
        let left = noise_penalty(&c[..k], &d[..k]).unwrap();
        let right = noise_penalty(&c[k..], &d[k..]).unwrap();
        prop_assert!((left.cumulative + right.cumulative - whole.cumulative).abs() < 1e-12);
    }
}
