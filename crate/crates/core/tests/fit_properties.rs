mod common;

use common::{normal_dataset, nn_loglik, weighted_mean};
use metaglmm::fit::{beta_standard_errors, Objective};
use metaglmm::sim::{generate_dataset, ScenarioSpec};
use metaglmm::{bundled, fit_constrained, fit_mle, profile_lr, total_loglik, FamilyKind, FitOptions, NodeSet};

const Y: [f64; 8] = [0.12, -0.35, 0.48, 0.91, 0.05, -0.1, 0.66, 0.3];
const V: [f64; 8] = [0.04, 0.09, 0.05, 0.2, 0.03, 0.12, 0.07, 0.1];

#[test]
fn normal_total_loglik_matches_closed_form() {
    let d = normal_dataset(&Y, &V, None);
    let nodes = NodeSet::sobol(4096, 0).unwrap();
    let q = |b: f64, t2: f64| total_loglik(&d, &[b], t2, &nodes).unwrap();
    let e = |b: f64, t2: f64| nn_loglik(&Y, &V, &[b; 8], t2);
    for &(b, t2) in &[(0.2, 0.1), (0.0, 0.3), (0.5, 0.02), (0.3, 1.0)] {
        let dq = q(b, t2) - q(0.25, 0.15);
        let de = e(b, t2) - e(0.25, 0.15);
        assert!((dq - de).abs() < 1e-4, "({b}, {t2}): {dq} vs {de}");
    }
}

#[test]
fn normal_fit_with_fixed_tau_is_weighted_mean() {
    let d = normal_dataset(&Y, &V, None);
    // The node-set error in beta is about 1.3e-6 at B = 4096 and shrinks as 1/B.
    let nodes = NodeSet::sobol(16384, 0).unwrap();
    let free = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    assert!(free.converged);
    let fixed = fit_mle(
        &d,
        &nodes,
        &FitOptions {
            tau2_fixed: Some(free.tau2_hat),
            ..Default::default()
        },
    )
    .unwrap();
    let wm = weighted_mean(&Y, &V, free.tau2_hat);
    assert!((fixed.beta_hat[0] - wm).abs() < 1e-6, "{} vs {wm}", fixed.beta_hat[0]);
}

#[test]
fn normal_profile_matches_closed_form() {
    let d = normal_dataset(&Y, &V, None);
    let nodes = NodeSet::sobol(4096, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    // closed-form profile: maximise over tau2 on a fine grid plus golden refinement
    let profile = |b: f64| {
        let f = |t: f64| -nn_loglik(&Y, &V, &[b; 8], t * t);
        let (mut lo, mut hi) = (0.0f64, 3.0f64);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        -f(0.5 * (lo + hi))
    };
    let l_max = profile(fit.beta_hat[0]).max((0..=400).map(|i| profile(-0.2 + i as f64 * 0.002)).fold(f64::MIN, f64::max));
    for &b in &[-0.1, 0.1, 0.4, 0.6] {
        let c = fit_constrained(&d, &nodes, 0, b, &fit.start(), &FitOptions::default()).unwrap();
        let oracle_gap = l_max - profile(b);
        let gap = fit.loglik - c.loglik;
        assert!((gap - oracle_gap).abs() < 1e-4, "b = {b}: {gap} vs {oracle_gap}");
        let t = profile_lr(&d, &nodes, &fit, 0, b).unwrap();
        assert!((t - 2.0 * oracle_gap).abs() < 2e-4, "b = {b}: T {t} vs {}", 2.0 * oracle_gap);
    }
    assert_eq!(profile_lr(&d, &nodes, &fit, 0, fit.beta_hat[0]).unwrap(), 0.0);
}

#[test]
fn constrained_fits_never_beat_the_mle() {
    let d = bundled::long2020();
    let nodes = NodeSet::sobol(1024, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    for &b in &[-1.5, -0.8, -0.43, -0.1, 0.5] {
        let c = fit_constrained(&d, &nodes, 1, b, &fit.start(), &FitOptions::default()).unwrap();
        assert!(c.loglik <= fit.loglik + 1e-8);
        assert_eq!(c.beta[1], b);
        assert_eq!(c.beta_rest().len(), 1);
    }
}

#[test]
fn long2020_estimate() {
    let d = bundled::long2020();
    let nodes = NodeSet::sobol(2048, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.beta_hat[1] + 0.431).abs() < 0.01, "{}", fit.beta_hat[1]);
    assert_eq!(fit.nodes_b, 2048);
}

#[test]
fn fits_are_bitwise_reproducible() {
    let d = bundled::long2020();
    let a = fit_mle(&d, &NodeSet::sobol(512, 9).unwrap(), &FitOptions::default()).unwrap();
    let b = fit_mle(&d, &NodeSet::sobol(512, 9).unwrap(), &FitOptions::default()).unwrap();
    assert_eq!(a.beta_hat.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.beta_hat.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.tau2_hat.to_bits(), b.tau2_hat.to_bits());
    assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
}

#[test]
fn profiles_are_unimodal_on_simulated_data() {
    let nodes = NodeSet::sobol(512, 0).unwrap();
    for (i, family) in [FamilyKind::Binomial, FamilyKind::Poisson, FamilyKind::Gamma].into_iter().enumerate() {
        for r in 0..3 {
            let spec = ScenarioSpec::new(family, 8, 0.5, 1, 100 + i as u64);
            let d = generate_dataset(&spec, r);
            let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
            assert!(fit.converged);
            let objective = Objective::new(&d, &nodes).unwrap();
            let se = beta_standard_errors(&objective, &fit)[0];
            let mut start = fit.start();
            let mut ll = Vec::new();
            for j in 0..21 {
                let b = fit.beta_hat[0] - 4.0 * se + 8.0 * se * j as f64 / 20.0;
                let c = fit_constrained(&d, &nodes, 0, b, &start, &FitOptions::default()).unwrap();
                start = c.start();
                ll.push(c.loglik);
            }
            for j in 1..20 {
                let interior_min = ll[j] < ll[j - 1] - 1e-8 && ll[j] < ll[j + 1] - 1e-8;
                assert!(!interior_min, "{family} rep {r}: {ll:?}");
            }
        }
    }
}

#[test]
fn binomial_estimate_is_consistent_at_large_k() {
    let spec = ScenarioSpec::new(FamilyKind::Binomial, 200, 0.5, 1, 77);
    let d = generate_dataset(&spec, 0);
    let nodes = NodeSet::sobol(1024, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.beta_hat[0] - spec.theta0).abs() < 0.05, "{}", fit.beta_hat[0]);
}

#[test]
fn few_records_warn() {
    let d = normal_dataset(&Y[..2], &V[..2], Some(&[vec![1.0, 0.0], vec![1.0, 1.0]]));
    let fit = fit_mle(&d, &NodeSet::sobol(64, 0).unwrap(), &FitOptions::default()).unwrap();
    assert!(!fit.warnings.is_empty());
}
