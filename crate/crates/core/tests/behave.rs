mod common;

use proptest::prelude::*;
use qwave::behave::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle_cdf, oracle_decision};

#[test]
fn oracle_self_check() {
    assert!((oracle_cdf(3.841458820694124, 1) - 0.95).abs() < 1e-9);
    assert!((oracle_cdf(14.067140449340169, 7) - 0.95).abs() < 1e-9);
}

#[test]
fn decisions_match_integrated_quantile() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut normal, mut anomalous) = (0, 0);
    for _ in 0..100 {
        let m = rng.random_range(2..=10);
        let expected: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..30.0)).collect();
        let spread = rng.random_range(0.0..1.0);
        let observed: Vec<f64> =
            expected.iter().map(|e| (e * (1.0 + spread * rng.random_range(-1.0..1.0))).round()).collect();
        let chi2 = chi_square_statistic(&observed, &expected).unwrap();
        let dof = m - 1;
        let got = chi_square_decision(chi2, dof).unwrap();
        assert_eq!(got, oracle_decision(chi2, dof), "chi2={chi2} dof={dof}");
        match got {
            Decision::Normal => normal += 1,
            Decision::Anomalous => anomalous += 1,
        }
    }
    assert!(normal > 0 && anomalous > 0);
}

#[test]
fn critical_values_against_oracle() {
    for dof in 1..=20 {
        let q = chi_square_critical(dof, 0.05).unwrap();
        assert!((oracle_cdf(q, dof) - 0.95).abs() < 1e-9, "dof {dof}");
    }
}

#[test]
fn reference_scaling_and_uniform_bins() {
    let h: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
    let r = build_reference_from_entropies(&h, 8, 100).unwrap();
    let e = r.expected(100);
    assert!((e.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    assert_eq!(e.len(), 8);
    assert!(e.iter().all(|v| (v - 12.5).abs() <= 0.5));
    assert_eq!(r.dof(), 7);
    let obs = r.observed(&h);
    assert_eq!(obs.iter().sum::<f64>(), 100.0);
}

#[test]
fn sparse_bins_are_merged() {
    let mut h = vec![0.95; 60];
    h.extend(vec![0.05; 37]);
    h.extend([0.3, 0.5, 0.6]);
    let r = build_reference_from_entropies(&h, 8, 100).unwrap();
    assert!(r.expected(100).iter().all(|&v| v >= 5.0));
    assert_eq!(r.proportions.len(), 2);
}

#[test]
fn degenerate_reference_rejected() {
    assert!(build_reference_from_entropies(&[0.4; 100], 8, 100).is_err());
    assert!(build_reference_from_entropies(&[0.4; 10], 8, 100).is_err());
    let p = vec![vec![0.25; 4]; 50];
    assert!(build_benign_reference(&p, 8, 50).is_err());
}

#[test]
fn batch_test_flags_shifted_entropies() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let benign: Vec<f64> = (0..400).map(|_| rng.random_range(0.6..0.9)).collect();
    let r = build_reference_from_entropies(&benign, 8, 100).unwrap();
    let same: Vec<f64> = (0..100).map(|_| rng.random_range(0.6..0.9)).collect();
    let shifted: Vec<f64> = (0..100).map(|_| rng.random_range(0.1..0.4)).collect();
    assert_eq!(r.test_batch(&shifted, 0.05).unwrap().1, Decision::Anomalous);
    assert!(r.test_batch(&same, 0.05).unwrap().0 < r.test_batch(&shifted, 0.05).unwrap().0);
}

#[test]
fn profile_markers() {
    let benign = vec![vec![0.4, 0.3, 0.2, 0.1]; 10];
    let profile = SubbandProfile::fit(&benign).unwrap();
    let m = profile.markers(&[0.4, 0.3, 0.2, 0.1], 0.05).unwrap();
    assert!(m.chi2.abs() < 1e-12);
    assert_eq!(m.decision, Decision::Normal);
    assert_eq!(m.dof, 3);
    let m = profile.markers(&[0.0, 0.0, 0.0, 1.0], 0.05).unwrap();
    assert_eq!(m.decision, Decision::Anomalous);
    assert_eq!(m.h_norm, 0.0);
}

#[test]
fn literal_correlation_of_identical_features() {
    // sum (x - 2)^2 = 2, sigma^2 = 2/3: R = 2 / (2 * 2/3) = 1.5
    let s = descriptive_stats(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
    assert!((s.correlation_literal[0][1] - 1.5).abs() < 1e-12);
    assert!((s.correlation[0][1] - 1.0).abs() < 1e-12);
}

#[test]
fn constant_feature_correlation() {
    let s = descriptive_stats(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![4.0, 5.0]]).unwrap();
    assert_eq!(s.correlation[1], vec![0.0, 1.0]);
    assert_eq!(s.correlation[0][1], 0.0);
    assert!(descriptive_stats(&[vec![1.0]]).is_err());
}

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, len).prop_filter("non-zero", |v| v.iter().sum::<f64>() > 1e-6).prop_map(
        |v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        },
    )
}

proptest! {
    #[test]
    fn entropy_in_unit_interval(p in simplex(8)) {
        let h = normalized_entropy(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn entropy_extremes(t in 2usize..16, k in 0usize..16) {
        let mut p = vec![0.0; t];
        p[k % t] = 1.0;
        prop_assert!(normalized_entropy(&p).unwrap().abs() < 1e-9);
        prop_assert!((normalized_entropy(&vec![1.0 / t as f64; t]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permutation_invariance(o in proptest::collection::vec(0.0f64..50.0, 6), e in proptest::collection::vec(0.5f64..50.0, 6), p in simplex(6), shift in 0usize..6) {
        let rot = |v: &Vec<f64>| { let mut w = v.clone(); w.rotate_left(shift); w };
        let a = chi_square_statistic(&o, &e).unwrap();
        let b = chi_square_statistic(&rot(&o), &rot(&e)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        let ha = normalized_entropy(&p).unwrap();
        let hb = normalized_entropy(&rot(&p)).unwrap();
        prop_assert!((ha - hb).abs() < 1e-12);
    }

    #[test]
    fn markers_bounded(p in simplex(4), q in simplex(4)) {
        let profile = SubbandProfile::fit(&[q]).unwrap();
        let m = profile.markers(&p, 0.05).unwrap();
        let row = append_markers(&[], &m).unwrap();
        prop_assert!((0.0..=1.0).contains(&row[0]));
        prop_assert!((0.0..1.0).contains(&row[1]));
    }

    #[test]
    fn correlation_bounds(rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 3..12)) {
        let s = descriptive_stats(&rows).unwrap();
        for j in 0..3 {
            prop_assert!(s.variance[j] >= 0.0);
            for k in 0..3 {
                prop_assert!(s.correlation[j][k].abs() <= 1.0 + 1e-12);
                prop_assert!((s.correlation[j][k] - s.correlation[k][j]).abs() < 1e-12);
            }
            prop_assert!((s.correlation[j][j] - 1.0).abs() < 1e-10);
        }
    }
}
