mod common;

use proptest::prelude::*;
use qwave::qkernel::{kernel_matrix, rbf, FeatureMap, KernelMode};
use qwave::svm::*;

use common::brute_force_dual;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Matrix = Vec<Vec<f64>>;

fn rbf_gram(x: &[Vec<f64>], gamma: f64) -> Matrix {
    x.iter().map(|a| x.iter().map(|b| rbf(a, b, gamma)).collect()).collect()
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Matrix, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (rbf_gram(&x, rng.random_range(0.5..3.0)), y)
}

#[test]
fn matches_brute_force_qp() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..20 {
        let n = rng.random_range(2..=8);
        let (k, y) = random_instance(&mut rng, n);
        let c = rng.random_range(0.1..5.0);
        let model = train_dual(&k, &y, c).unwrap();
        let oracle = brute_force_dual(&k, &y, c);
        assert!((model.objective - oracle).abs() <= 1e-4, "case {case}: {} vs {oracle}", model.objective);
    }
}

#[test]
fn separable_rbf_set_fits_exactly() {
    let x = vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![2.0, 2.0], vec![2.1, 1.8]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let k = rbf_gram(&x, 1.0);
    let m = train_dual(&k, &y, 10.0).unwrap();
    let pred = m.predict_all(&k).unwrap();
    assert_eq!(pred, y);
    assert!((m.objective - brute_force_dual(&k, &y, 10.0)).abs() < 1e-4);
}

#[test]
fn conflicting_duplicates_hit_the_bound() {
    let x = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![-1.0, 0.0], vec![1.5, 1.0]];
    let y = vec![1.0, -1.0, -1.0, 1.0];
    let k = rbf_gram(&x, 1.0);
    let c = 2.0;
    let m = train_dual(&k, &y, c).unwrap();
    assert!((m.alpha[0] - c).abs() < 1e-9 && (m.alpha[1] - c).abs() < 1e-9);
}

#[test]
fn support_vector_recovers_its_label() {
    let x = vec![vec![0.0, 0.0], vec![0.3, 0.2], vec![3.0, 3.0], vec![3.2, 2.9]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let k = rbf_gram(&x, 0.5);
    let m = train_dual(&k, &y, 1.0).unwrap();
    let sv = *m.support_idx.iter().find(|&&i| y[i] == 1.0).unwrap();
    assert_eq!(predict(&m, &k[sv]).unwrap(), 1.0);
}

#[test]
fn scale_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let (k, y) = random_instance(&mut rng, 12);
        let s = rng.random_range(0.2..5.0);
        let c = 1.0;
        let scaled: Matrix = k.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
        let cfg = SmoConfig { tol: 1e-9, ..SmoConfig::default() };
        let a = train_dual_with(&k, &y, c, &cfg).unwrap();
        let b = train_dual_with(&scaled, &y, c / s, &cfg).unwrap();
        for i in 0..12 {
            let (da, db) = (a.decision(&k[i]).unwrap(), b.decision(&scaled[i]).unwrap());
            if da.abs() > 1e-6 {
                assert_eq!(da.signum(), db.signum());
            }
        }
    }
}

#[test]
fn one_class_nu_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..20 {
        let n = rng.random_range(10..40);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let k = rbf_gram(&x, rng.random_range(0.5..3.0));
        let nu = rng.random_range(0.05..0.9);
        let m = train_one_class(&k, nu).unwrap();
        assert!((m.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        let upper = 1.0 / (nu * n as f64);
        assert!(m.alpha.iter().all(|&a| (-1e-12..=upper + 1e-12).contains(&a)));
        let at_bound = m.alpha.iter().filter(|&&a| a >= upper - 1e-12).count();
        let support = m.alpha.iter().filter(|&&a| a > 1e-12).count();
        assert!(at_bound as f64 <= nu * n as f64 + 1e-9, "case {case}: {at_bound} bounded of {n} at nu {nu}");
        assert!(support as f64 >= nu * n as f64 - 1e-9, "case {case}: {support} support of {n} at nu {nu}");
        // Strict outliers (beyond the solver tolerance) must sit at the bound.
        let outliers = k.iter().filter(|row| m.decision(row).unwrap() < -1e-3).count();
        assert!(outliers <= at_bound, "case {case}: {outliers} outliers, {at_bound} bounded");
    }
}

#[test]
fn one_class_flags_far_outlier() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut x: Vec<Vec<f64>> = (0..19).map(|_| (0..2).map(|_| rng.random_range(-0.1..0.1)).collect()).collect();
    x.push(vec![3.0, 3.0]);
    let k = rbf_gram(&x, 1.0);
    let m = train_one_class(&k, 0.2).unwrap();
    assert!(m.is_outlier(&k[19]).unwrap());
    assert!((0..19).filter(|&i| m.is_outlier(&k[i]).unwrap()).count() <= 3);
}

#[test]
fn hinge_reduces_to_unweighted() {
    let model = LinearModel { w: vec![0.5, -0.3], b: 0.1 };
    let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 1.0]];
    let y = vec![1.0, -1.0, 1.0];
    let plain: f64 = x
        .iter()
        .zip(&y)
        .map(|(xi, yi): (&Vec<f64>, &f64)| (1.0f64 - yi * (0.5 * xi[0] - 0.3 * xi[1] + 0.1)).max(0.0))
        .sum::<f64>()
        / 3.0;
    assert!((weighted_hinge_loss(&model, &[1.0; 3], &x, &y).unwrap() - plain).abs() < 1e-15);
    assert!(weighted_hinge_loss(&model, &[1.0, 0.0, 1.0], &x, &y).is_err());
}

#[test]
fn hinge_zero_beyond_margin() {
    let model = LinearModel { w: vec![2.0], b: 0.0 };
    let x = vec![vec![1.0], vec![-1.0]];
    let y = vec![1.0, -1.0];
    assert_eq!(weighted_hinge_loss(&model, &[1.0, 2.0], &x, &y).unwrap(), 0.0);
    let (gw, gb) = weighted_gradient(&LinearModel { w: vec![3.0], b: 0.0 }, &[1.0, 2.0], &x, &y).unwrap();
    assert_eq!((gw, gb), (vec![0.0], 0.0));
}

#[test]
fn hinge_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut checked = 0;
    while checked < 50 {
        let d = rng.random_range(1..5);
        let n = rng.random_range(2..10);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let model =
            LinearModel { w: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), b: rng.random_range(-0.5..0.5) };
        let near_kink = x.iter().zip(&y).any(|(xi, yi)| {
            let m: f64 = yi * (xi.iter().zip(&model.w).map(|(a, b)| a * b).sum::<f64>() + model.b);
            (m - 1.0).abs() < 1e-4
        });
        if near_kink {
            continue;
        }
        let (gw, gb) = weighted_gradient(&model, &weights, &x, &y).unwrap();
        let h = 1e-5;
        let loss = |m: &LinearModel| weighted_hinge_loss(m, &weights, &x, &y).unwrap();
        for k in 0..d {
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus.w[k] += h;
            minus.w[k] -= h;
            assert!(((loss(&plus) - loss(&minus)) / (2.0 * h) - gw[k]).abs() <= 1e-5);
        }
        let fd_b = (loss(&LinearModel { b: model.b + h, ..model.clone() })
            - loss(&LinearModel { b: model.b - h, ..model.clone() }))
            / (2.0 * h);
        assert!((fd_b - gb).abs() <= 1e-5);
        checked += 1;
    }
}

#[test]
fn weighted_trainer_separates_easy_data() {
    let x = vec![vec![-2.0, -1.0], vec![-1.5, -2.0], vec![2.0, 1.0], vec![1.0, 2.5]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let model = train_weighted_hinge(&x, &y, &[1.0, 0.5, 2.0, 1.0], &HingeTrainConfig::default()).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        let score: f64 = xi.iter().zip(&model.w).map(|(a, b)| a * b).sum::<f64>() + model.b;
        assert_eq!(score.signum(), *yi);
    }
}

#[test]
fn svc_loss_identity_geometry() {
    // Orthogonal feature states give K = I; the optimum of
    // a1 + a2 - (a1^2 + a2^2)/2 with a1 = a2 is 1 at a = (1, 1).
    let map = FeatureMap::trainable(vec![0.0], 1);
    let x = vec![vec![0.0], vec![std::f64::consts::FRAC_PI_2]];
    let k = kernel_matrix(&map, &x, KernelMode::Exact).unwrap();
    assert!(k.values[0][1] < 1e-12);
    let loss = svc_loss(&[0.0], &x, &[1.0, -1.0], &map, 10.0).unwrap();
    assert!((loss - 1.0).abs() < 1e-9);
}

#[test]
fn svc_loss_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let x: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let map = FeatureMap::trainable(vec![0.1, -0.4, 0.7], 2);
    let theta = [0.3, 0.2, -0.5];
    let a = svc_loss(&theta, &x, &y, &map, 1.0).unwrap();
    let order = [3, 0, 7, 1, 6, 2, 5, 4];
    let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let b = svc_loss(&theta, &xp, &yp, &map, 1.0).unwrap();
    assert!((a - b).abs() < 1e-3);
}

proptest! {
    #[test]
    fn dual_feasibility(seed in any::<u64>(), n in 2usize..30, c in 0.05f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, y) = random_instance(&mut rng, n);
        let m = train_dual(&k, &y, c).unwrap();
        prop_assert!(m.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let eq: f64 = m.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(eq.abs() <= 1e-8);
        prop_assert!(m.kkt_gap <= 1e-3);
    }
}
