use std::sync::atomic::{AtomicUsize, Ordering};

use qwave::spsa::*;
use qwave::Result;

fn sphere(theta: &[f64]) -> Result<f64> {
    Ok(theta.iter().map(|t| t * t).sum())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn two_evaluations_per_iteration() {
    let calls = AtomicUsize::new(0);
    let counted = |t: &[f64]| {
        calls.fetch_add(1, Ordering::SeqCst);
        sphere(t)
    };
    let cfg = SpsaConfig { iterations: 13, ..SpsaConfig::default() };
    let (_, trace) = spsa_minimize(counted, &[0.5, 0.2, -0.1], &cfg).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 26);
    assert_eq!(trace.len(), 13);
}

#[test]
fn reproducible_for_a_seed() {
    let cfg = SpsaConfig { seed: 99, ..SpsaConfig::default() };
    let a = spsa_minimize(sphere, &[0.4, -0.7, 1.1], &cfg).unwrap();
    let b = spsa_minimize(sphere, &[0.4, -0.7, 1.1], &cfg).unwrap();
    assert_eq!(a, b);
    let c = spsa_minimize(sphere, &[0.4, -0.7, 1.1], &SpsaConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.1, c.1);
}

#[test]
fn quadratic_descends_from_ones() {
    let cfg = SpsaConfig::default();
    let (theta, trace) = spsa_minimize(sphere, &[1.0, 1.0], &cfg).unwrap();
    let last = &trace.steps.last().unwrap();
    let final_theta: Vec<f64> = last.theta.clone();
    assert!(norm(&final_theta) < norm(&[1.0, 1.0]));
    assert!(norm(&theta) <= norm(&final_theta) + 1e-2);
}

#[test]
fn mean_descent_over_seeds() {
    let theta0 = vec![0.8, -0.5, 0.3, 1.2, -1.0, 0.6, -0.2, 0.9];
    let initial = sphere(&theta0).unwrap();
    let mut finals = 0.0;
    for seed in 0..20 {
        let cfg = SpsaConfig { seed, ..SpsaConfig::default() };
        let (theta, _) = spsa_minimize(sphere, &theta0, &cfg).unwrap();
        finals += sphere(&theta).unwrap();
    }
    assert!(finals / 20.0 < initial);
}

#[test]
fn stays_inside_the_box() {
    let steep = |t: &[f64]| Ok(-100.0 * t.iter().sum::<f64>());
    let (theta, trace) = spsa_minimize(steep, &[3.0, -3.0], &SpsaConfig::default()).unwrap();
    let pi = std::f64::consts::PI;
    assert!(theta.iter().all(|t| (-pi..=pi).contains(t)));
    assert!(trace.steps.iter().flat_map(|s| &s.theta).all(|t| (-pi..=pi).contains(t)));
}

#[test]
fn non_finite_losses_are_skipped() {
    let calls = AtomicUsize::new(0);
    let flaky = |t: &[f64]| {
        // The first iteration's pair of evaluations fails.
        if calls.fetch_add(1, Ordering::SeqCst) < 2 {
            Ok(f64::NAN)
        } else {
            sphere(t)
        }
    };
    let (theta, trace) = spsa_minimize(flaky, &[0.5, 0.5], &SpsaConfig::default()).unwrap();
    assert!(trace.steps[0].skipped && trace.steps[0].loss.is_nan());
    assert_eq!(trace.steps[1].theta, vec![0.5, 0.5]);
    assert!(theta.iter().all(|t| t.is_finite()));
    assert!(best_of_trace(&trace).unwrap() > 0);
}

#[test]
fn loss_errors_propagate() {
    let failing = |_: &[f64]| Err(qwave::Error::Contract("boom".into()));
    assert!(spsa_minimize(failing, &[0.0], &SpsaConfig::default()).is_err());
}

#[test]
fn trace_csv_layout() {
    let (_, trace) =
        spsa_minimize(sphere, &[0.1, 0.2], &SpsaConfig { iterations: 3, ..SpsaConfig::default() }).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,loss,step_norm,grad_norm,skipped,theta_0,theta_1");
    assert_eq!(lines.len(), 4);
}
