mod common;

use common::{adaptive_gh, gauss_hermite, raw_kernel, record, star_discrepancy};
use metaglmm::{marginal_loglik_study, FamilyKind, FamilySpec, NodeSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gauss_hermite_integrates_moments() {
    let (x, w) = gauss_hermite(50);
    let pi = std::f64::consts::PI;
    let m0: f64 = w.iter().sum();
    let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
    assert!((m0 - pi.sqrt()).abs() < 1e-12);
    assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
    assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-11);
}

#[test]
fn binomial_record_matches_quadrature() {
    let r = record(FamilyKind::Binomial, 10.0, 0.3, None);
    let nodes = NodeSet::sobol(2048, 0).unwrap();
    let q = marginal_loglik_study(&r, FamilySpec::binomial(), &[0.0], 1.0, &nodes).unwrap();
    let oracle = adaptive_gh(FamilyKind::Binomial, &r, 0.0, 1.0, 50);
    assert!((q - oracle).abs() < 1e-5, "{q} vs {oracle}");
}

#[test]
fn zero_tau_is_the_conditional_likelihood() {
    let r = record(FamilyKind::Poisson, 40.0, 0.2, None);
    let nodes = NodeSet::sobol(64, 5).unwrap();
    let q = marginal_loglik_study(&r, FamilySpec::poisson(), &[-1.3], 0.0, &nodes).unwrap();
    assert!((q - raw_kernel(FamilyKind::Poisson, &r, -1.3)).abs() < 1e-12);
}

#[test]
fn normal_record_matches_closed_form_differences() {
    let (y, v) = (0.7, 0.3);
    let r = record(FamilyKind::Normal, 1.0, y, Some(v));
    let nodes = NodeSet::sobol(4096, 0).unwrap();
    let exact = |b: f64, t2: f64| -0.5 * ((v + t2).ln() + (y - b).powi(2) / (v + t2));
    let q = |b: f64, t2: f64| marginal_loglik_study(&r, FamilySpec::normal(), &[b], t2, &nodes).unwrap();
    let base = (0.1, 0.5);
    for &(b, t2) in &[(0.4, 0.2), (1.2, 1.0), (-0.5, 0.05), (0.7, 2.0)] {
        let d_q = q(b, t2) - q(base.0, base.1);
        let d_e = exact(b, t2) - exact(base.0, base.1);
        assert!((d_q - d_e).abs() < 1e-4, "({b}, {t2}): {d_q} vs {d_e}");
    }
}

#[test]
fn error_decays_with_nodes() {
    let r = record(FamilyKind::Binomial, 10.0, 0.3, None);
    let oracle = adaptive_gh(FamilyKind::Binomial, &r, 0.0, 1.0, 50);
    let errs: Vec<f64> = [64, 256, 1024, 4096]
        .iter()
        .map(|&b| {
            let nodes = NodeSet::sobol(b, 0).unwrap();
            (marginal_loglik_study(&r, FamilySpec::binomial(), &[0.0], 1.0, &nodes).unwrap() - oracle).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    assert!(errs[3] < errs[0] / 10.0, "{errs:?}");
}

#[test]
fn sobol_beats_random_in_star_discrepancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut wins = 0;
    for trial in 0..100u64 {
        let nodes = NodeSet::sobol(256, trial + 1).unwrap();
        let random: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
        if star_discrepancy(nodes.uniform()) < star_discrepancy(&random) {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins}");
}

#[test]
fn gamma_and_poisson_records_match_quadrature() {
    let nodes = NodeSet::sobol(4096, 0).unwrap();
    let g = record(FamilyKind::Gamma, 30.0, 1.8, Some(1.2));
    let q = marginal_loglik_study(&g, FamilySpec::gamma(), &[0.3], 0.5, &nodes).unwrap();
    let o = adaptive_gh(FamilyKind::Gamma, &g, 0.3, 0.5, 50);
    assert!((q - o).abs() < 1e-4, "{q} vs {o}");
    let p = record(FamilyKind::Poisson, 80.0, 0.15, None);
    let q = marginal_loglik_study(&p, FamilySpec::poisson(), &[-2.0], 1.0, &nodes).unwrap();
    let o = adaptive_gh(FamilyKind::Poisson, &p, -2.0, 1.0, 50);
    assert!((q - o).abs() < 1e-4, "{q} vs {o}");
}
