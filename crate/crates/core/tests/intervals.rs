mod common;

use common::normal_dataset;
use metaglmm::data::{expand_two_arm, ArmSummary, TwoArmRow};
use metaglmm::inference::{confidence_interval, confidence_intervals, BoundFlag, Method};
use metaglmm::special::chi2_1_upper_quantile;
use metaglmm::{bundled, fit_mle, FamilySpec, FitOptions, NodeSet};

#[test]
fn symmetric_normal_data_give_symmetric_pl() {
    let y = [0.1, 0.9, 0.3, 0.7, 0.45, 0.55];
    let v = [0.05, 0.05, 0.1, 0.1, 0.02, 0.02];
    let d = normal_dataset(&y, &v, None);
    let nodes = NodeSet::sobol(2048, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    assert!((fit.beta_hat[0] - 0.5).abs() < 1e-5);
    let pl = confidence_interval(&d, &nodes, &fit, 0, 0.95, Method::Pl).unwrap();
    let gap = (pl.upper - fit.beta_hat[0]) - (fit.beta_hat[0] - pl.lower);
    assert!(gap.abs() < 1e-3, "{pl:?}");
}

#[test]
fn plsbc_endpoints_sit_on_the_cutoff() {
    let d = bundled::long2020();
    let nodes = NodeSet::sobol(1024, 3).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    let (pl, sbc) = confidence_intervals(&d, &nodes, &fit, 1, 0.95).unwrap();
    let q = chi2_1_upper_quantile(0.05);
    for bound in [sbc.lower, sbc.upper] {
        let p = sbc.trace.iter().find(|p| p.value == bound).unwrap();
        assert!((p.corrected - q).abs() < 1e-3, "{p:?}");
    }
    for bound in [pl.lower, pl.upper] {
        let p = pl.trace.iter().find(|p| p.value == bound).unwrap();
        assert!((p.lr - q).abs() < 1e-3, "{p:?}");
    }
    assert!(sbc.lower <= pl.lower && pl.upper <= sbc.upper);
    assert!(pl.lower <= pl.estimate && pl.estimate <= pl.upper);
    assert!(sbc.bartlett_c > 0.0);
    assert!(pl.converged() && sbc.converged());
}

#[test]
fn higher_level_gives_wider_interval() {
    let d = bundled::long2020();
    let nodes = NodeSet::sobol(512, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    let a = confidence_interval(&d, &nodes, &fit, 1, 0.9, Method::Pl).unwrap();
    let b = confidence_interval(&d, &nodes, &fit, 1, 0.99, Method::Pl).unwrap();
    assert!(b.lower < a.lower && a.upper < b.upper);
    assert!(confidence_interval(&d, &nodes, &fit, 1, 0.4, Method::Pl).is_err());
    assert!(confidence_interval(&d, &nodes, &fit, 2, 0.95, Method::Pl).is_err());
}

#[test]
fn all_zero_treatment_arms_leave_the_lower_bound_open() {
    let arm = |n: f64, e: f64| {
        Some(ArmSummary {
            size: n,
            outcome: e,
            spread: None,
        })
    };
    let rows: Vec<TwoArmRow> = [(20.0, 3.0), (25.0, 5.0), (30.0, 2.0), (22.0, 4.0)]
        .iter()
        .enumerate()
        .map(|(i, &(n, e))| TwoArmRow {
            study: format!("s{i}"),
            treatment: arm(n, 0.0),
            control: arm(n, e),
            covariates: vec![],
        })
        .collect();
    let d = expand_two_arm(FamilySpec::binomial(), &rows, &[]).unwrap();
    let nodes = NodeSet::sobol(512, 0).unwrap();
    let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
    let (pl, sbc) = confidence_intervals(&d, &nodes, &fit, 1, 0.95).unwrap();
    assert_eq!(pl.flags[0], BoundFlag::Unbounded, "{pl:?}");
    assert_eq!(pl.lower, f64::NEG_INFINITY);
    assert_ne!(sbc.flags[0], BoundFlag::Converged);
    assert_eq!(pl.flags[1], BoundFlag::Converged);
    assert!(sbc.upper >= pl.upper);
}
