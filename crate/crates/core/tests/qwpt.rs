use std::f64::consts::LN_2;

use proptest::prelude::*;
use qwave::encode::EncodedSample;
use qwave::qwpt::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

/// Haar packet energies by explicit orthogonal matrices: level by level,
/// multiply every packet by the two-row filter bank matrix.
fn dense_packet_energies(signal: &[f64], levels: usize) -> Vec<f64> {
    let mut packets = vec![signal.to_vec()];
    for _ in 0..levels {
        let mut next = Vec::new();
        for p in &packets {
            let m = p.len() / 2;
            let r = 1.0 / 2f64.sqrt();
            let mut low = vec![0.0; m];
            let mut high = vec![0.0; m];
            for k in 0..m {
                for (j, v) in p.iter().enumerate() {
                    let lo = if j == 2 * k || j == 2 * k + 1 { r } else { 0.0 };
                    let hi = if j == 2 * k {
                        r
                    } else if j == 2 * k + 1 {
                        -r
                    } else {
                        0.0
                    };
                    low[k] += lo * v;
                    high[k] += hi * v;
                }
            }
            next.push(low);
            next.push(high);
        }
        packets = next;
    }
    packets.iter().map(|p| p.iter().map(|v| v * v).sum()).collect()
}

fn product_amplitudes(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    (0..1usize << n)
        .map(|i| {
            (0..n)
                .map(|q| {
                    let cc = c[q].clamp(1e-6, 1.0 - 1e-6);
                    if i >> q & 1 == 1 {
                        cc.sqrt()
                    } else {
                        (1.0 - cc).sqrt()
                    }
                })
                .product()
        })
        .collect()
}

fn reverse(x: usize, bits: usize) -> usize {
    (0..bits).fold(0, |acc, b| acc | (((x >> b) & 1) << (bits - 1 - b)))
}

#[test]
fn circuit_matches_classical_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<Vec<f64>> = (0..100).map(|_| random_signal(&mut rng, 8)).collect();
    let err = validate_qwpt_against_classical(&samples, &QwptConfig::new(3, 2).with_rz_phase(false)).unwrap();
    assert!(err < 1e-6, "mean error {err}");
    let samples: Vec<Vec<f64>> = (0..20).map(|_| random_signal(&mut rng, 16)).collect();
    for h in 1..=3 {
        let err = validate_qwpt_against_classical(&samples, &QwptConfig::new(4, h).with_rz_phase(false)).unwrap();
        assert!(err < 1e-10, "h={h} error {err}");
    }
}

#[test]
fn constant_signal_through_one_level() {
    let err = validate_qwpt_against_classical(&[vec![1.0; 4]], &QwptConfig::new(2, 1).with_rz_phase(false)).unwrap();
    assert!(err < 1e-6);
}

#[test]
fn phase_gate_breaks_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Vec<f64>> = (0..10).map(|_| random_signal(&mut rng, 8)).collect();
    let err = validate_qwpt_against_classical(&samples, &QwptConfig::new(3, 2)).unwrap();
    assert!(err > 1e-6);
}

#[test]
fn energies_match_dense_filter_bank() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = random_signal(&mut rng, 4);
        let s = EncodedSample::product_ry(&c).unwrap();
        for h in 1..=3 {
            let w = run_qwpt(&s, &QwptConfig::new(4, h).with_rz_phase(false)).unwrap();
            let oracle = dense_packet_energies(&product_amplitudes(&c), h);
            for t in 0..1 << h {
                assert!((w.energies[t] - oracle[reverse(t, h)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn delta_input_splits_evenly_at_first_level() {
    // |000> has equal approximation and detail energy after one Haar level.
    let s = EncodedSample::product_ry(&[0.0; 3]).unwrap();
    let w = run_qwpt(&s, &QwptConfig::new(3, 1)).unwrap();
    let oracle = dense_packet_energies(&product_amplitudes(&[0.0; 3]), 1);
    assert!((w.energies[0] - oracle[0]).abs() < 1e-10);
    assert!((w.energies[0] - 0.5).abs() < 1e-2);
    assert!((w.wpee - LN_2).abs() < 1e-3);
}

#[test]
fn shots_close_to_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let s = EncodedSample::product_ry(&random_signal(&mut rng, 4)).unwrap();
        let exact = run_qwpt(&s, &QwptConfig::new(4, 2)).unwrap();
        let cfg = QwptConfig::new(4, 2).with_execution(Execution::Shots { shots: 8192, seed });
        let sampled = run_qwpt(&s, &cfg).unwrap();
        let tv: f64 = exact.f.iter().zip(&sampled.f).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 0.05, "tv {tv}");
    }
}

#[test]
fn zero_shots_rejected() {
    let s = EncodedSample::product_ry(&[0.5; 3]).unwrap();
    let cfg = QwptConfig::new(3, 1).with_execution(Execution::Shots { shots: 0, seed: 0 });
    assert!(run_qwpt(&s, &cfg).is_err());
}

#[test]
fn gate_count_bound() {
    for n in 2..10 {
        for h in 1..n {
            let c = build_qwpt_circuit(&QwptConfig::new(n, h)).unwrap();
            assert!(c.unitary_gate_count() <= 3 * h * n);
        }
    }
}

#[test]
fn energy_preserved_by_classical_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_signal(&mut rng, 8);
    let tree = classical_haar_wpt(&x, 2).unwrap();
    let e0: f64 = x.iter().map(|v| v * v).sum();
    let e2: f64 = tree.leaves().iter().flatten().map(|v| v * v).sum();
    assert!((e0 - e2).abs() < 1e-12);
    let oracle: f64 = dense_packet_energies(&x, 2).iter().sum();
    assert!((oracle - e2).abs() < 1e-12);
    assert_eq!(tree.to_register_layout().len(), 8);
}

#[test]
fn zero_detail_branch_is_uniform() {
    // The all-|+> state is a constant signal with no detail energy; the
    // detail child is rebuilt from the uniform vector, i.e. all-|+> again.
    let s = EncodedSample::product_ry(&[0.5; 4]).unwrap();
    let cfg = QwptConfig::new(4, 2).with_rz_phase(false);
    let tree = recursive_decompose(&s, &cfg).unwrap();
    assert!(tree[0].energies[1] < 1e-12);
    let child = EncodedSample::product_ry(&[0.5; 3]).unwrap();
    let expected = run_qwpt(&child, &QwptConfig::new(3, 1).with_rz_phase(false)).unwrap();
    for (a, b) in tree[2].f.iter().zip(&expected.f) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn features_on_simplex(c in proptest::collection::vec(0.0f64..=1.0, 4), h in 1usize..=3, rz: bool) {
        let s = EncodedSample::product_ry(&c).unwrap();
        let w = run_qwpt(&s, &QwptConfig::new(4, h).with_rz_phase(rz)).unwrap();
        prop_assert!(w.f.iter().all(|&v| v >= 0.0));
        prop_assert!((w.f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((w.energies.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.wpee >= 0.0 && w.wpee <= max_wpee(h) + 1e-12);
    }

    #[test]
    fn entropy_extremes(k in 0usize..4) {
        let mut e = vec![0.0; 4];
        e[k] = 1.0;
        prop_assert_eq!(energy_entropy(&e), 0.0);
        prop_assert!((energy_entropy(&[0.25; 4]) - max_wpee(2)).abs() < 1e-9);
    }
}
