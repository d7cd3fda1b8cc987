//! Maximum-likelihood fitting of `(beta, tau^2)` over the QMC likelihood,
//! unconstrained and with one coefficient pinned.
//!
//! `tau^2` is optimized as `softplus(s)^2` with `s` unconstrained, which keeps
//! the objective smooth down to `tau^2 = 0`.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::dot;
use crate::linalg;
use crate::nn_baseline;
use crate::optim::{self, OptimOptions};
use crate::qmc::{NodeSet, RecordKernel};
use crate::special::{softplus, softplus_inv};

/// Reported `tau^2` values below this are clamped to zero.
pub const TAU2_ZERO: f64 = 1e-10;
/// Floor applied to the default starting value of `tau^2`.
pub const TAU2_START_FLOOR: f64 = 1e-4;

/// The QMC log-likelihood of a dataset on one shared node set.
pub struct Objective<'a> {
    dataset: &'a Dataset,
    nodes: &'a NodeSet,
    kernels: Vec<RecordKernel>,
    saturated: f64,
}

impl<'a> Objective<'a> {
    pub fn new(dataset: &'a Dataset, nodes: &'a NodeSet) -> Result<Self> {
        let kernels = dataset
            .records
            .iter()
            .map(|r| RecordKernel::new(r, dataset.family))
            .collect::<Result<Vec<_>>>()?;
        let saturated = kernels.iter().map(RecordKernel::saturated).sum();
        Ok(Self {
            dataset,
            nodes,
            kernels,
            saturated,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn nodes(&self) -> &NodeSet {
        self.nodes
    }

    /// Log-likelihood minus the saturated constants, summed in record order.
    pub fn centered(&self, beta: &[f64], tau: f64) -> f64 {
        self.dataset
            .records
            .iter()
            .zip(&self.kernels)
            .map(|(r, k)| k.centered_loglik(dot(&r.x, beta), tau, self.nodes))
            .sum()
    }

    /// The sum of per-study marginal log-likelihoods.
    pub fn loglik(&self, beta: &[f64], tau2: f64) -> Result<f64> {
        if beta.len() != self.dataset.p() {
            return Err(Error::InvalidArgument(format!(
                "beta has length {}, dataset has p = {}",
                beta.len(),
                self.dataset.p()
            )));
        }
        if !(tau2 >= 0.0) || !tau2.is_finite() {
            return Err(Error::InvalidArgument(format!("tau2 must be non-negative, got {tau2}")));
        }
        let tau = tau2.sqrt();
        let mut total = 0.0;
        for (r, k) in self.dataset.records.iter().zip(&self.kernels) {
            let v = k.centered_loglik(dot(&r.x, beta), tau, self.nodes);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    record: r.record_id.clone(),
                    beta: beta.to_vec(),
                    tau2,
                });
            }
            total += v + k.saturated();
        }
        Ok(total)
    }

    /// The saturated constants removed by [`Objective::centered`].
    pub fn saturated(&self) -> f64 {
        self.saturated
    }
}

/// Sum over records of the study marginal log-likelihoods.
pub fn total_loglik(dataset: &Dataset, beta: &[f64], tau2: f64, nodes: &NodeSet) -> Result<f64> {
    Objective::new(dataset, nodes)?.loglik(beta, tau2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartValues {
    pub beta: Vec<f64>,
    pub tau2: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub init: Option<StartValues>,
    /// Holds `tau^2` at this value instead of estimating it.
    pub tau2_fixed: Option<f64>,
    pub optim: OptimOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub beta_hat: Vec<f64>,
    pub tau2_hat: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub nodes_b: usize,
    pub seed: u64,
    /// Whether `tau^2` was held fixed.
    pub tau2_fixed: bool,
    pub warnings: Vec<String>,
}

impl ModelFit {
    pub fn start(&self) -> StartValues {
        StartValues {
            beta: self.beta_hat.clone(),
            tau2: self.tau2_hat,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedFit {
    pub pinned_index: usize,
    pub pinned_value: f64,
    /// Full coefficient vector, pinned entry included.
    pub beta: Vec<f64>,
    pub tau2_tilde: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ConstrainedFit {
    /// Coefficients other than the pinned one.
    pub fn beta_rest(&self) -> Vec<f64> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.pinned_index)
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn start(&self) -> StartValues {
        StartValues {
            beta: self.beta.clone(),
            tau2: self.tau2_tilde,
        }
    }
}

/// Starting values from a normal-approximation DerSimonian-Laird
/// meta-regression on the link scale.
pub fn default_start(dataset: &Dataset) -> StartValues {
    let (theta, var) = nn_baseline::link_scale_estimates(dataset);
    let x: Vec<Vec<f64>> = dataset.records.iter().map(|r| r.x.clone()).collect();
    match nn_baseline::dl_regression(&theta, &var, &x) {
        Some(dl) => StartValues {
            beta: dl.beta,
            tau2: dl.tau2.max(TAU2_START_FLOOR),
        },
        None => {
            let mut beta = vec![0.0; dataset.p()];
            beta[0] = theta.iter().sum::<f64>() / theta.len() as f64;
            StartValues {
                beta,
                tau2: TAU2_START_FLOOR.max(0.1),
            }
        }
    }
}

struct Solution {
    beta: Vec<f64>,
    tau2: f64,
    loglik: f64,
    minimum: optim::Minimum,
}

fn tau_param(tau2: f64) -> f64 {
    softplus_inv(tau2.max(1e-20).sqrt())
}

fn maximize(
    objective: &Objective,
    pinned: Option<(usize, f64)>,
    tau2_fixed: Option<f64>,
    start: &StartValues,
    optim_opts: &OptimOptions,
) -> Result<Solution> {
    let p = objective.dataset().p();
    if start.beta.len() != p {
        return Err(Error::InvalidArgument(format!(
            "start has {} coefficients, dataset has p = {p}",
            start.beta.len()
        )));
    }
    let free: Vec<usize> = (0..p).filter(|&i| Some(i) != pinned.map(|(j, _)| j)).collect();
    let estimate_tau = tau2_fixed.is_none();

    let unpack = |theta: &[f64]| -> (Vec<f64>, f64) {
        let mut beta = start.beta.clone();
        if let Some((j, v)) = pinned {
            beta[j] = v;
        }
        for (slot, &i) in free.iter().enumerate() {
            beta[i] = theta[slot];
        }
        let tau = match tau2_fixed {
            Some(t2) => t2.sqrt(),
            None => softplus(theta[free.len()]),
        };
        (beta, tau)
    };

    let mut x0: Vec<f64> = free.iter().map(|&i| start.beta[i]).collect();
    if estimate_tau {
        x0.push(tau_param(start.tau2));
    }
    let neg = |theta: &[f64]| {
        let (beta, tau) = unpack(theta);
        let v = objective.centered(&beta, tau);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let minimum = optim::minimize(neg, &x0, optim_opts);
    let (beta, tau) = unpack(&minimum.x);
    let mut tau2 = tau * tau;
    if tau2 < TAU2_ZERO {
        tau2 = 0.0;
    }
    let loglik = objective.loglik(&beta, tau2)?;
    Ok(Solution {
        beta,
        tau2,
        loglik,
        minimum,
    })
}

/// Joint maximum-likelihood estimate of `(beta, tau^2)`.
///
/// Non-convergence is reported through `converged = false`, not as an error.
pub fn fit_mle(dataset: &Dataset, nodes: &NodeSet, options: &FitOptions) -> Result<ModelFit> {
    let objective = Objective::new(dataset, nodes)?;
    fit_mle_with(&objective, options)
}

pub fn fit_mle_with(objective: &Objective, options: &FitOptions) -> Result<ModelFit> {
    let dataset = objective.dataset();
    if let Some(t) = options.tau2_fixed {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("fixed tau2 must be non-negative, got {t}")));
        }
    }
    let mut warnings = Vec::new();
    if dataset.len() < dataset.p() + 1 {
        warnings.push(format!(
            "{} records for {} coefficients: estimates may be unstable",
            dataset.len(),
            dataset.p()
        ));
    }
    let start = match &options.init {
        Some(s) => s.clone(),
        None => default_start(dataset),
    };
    let sol = maximize(objective, None, options.tau2_fixed, &start, &options.optim)?;
    Ok(ModelFit {
        beta_hat: sol.beta,
        tau2_hat: options.tau2_fixed.unwrap_or(sol.tau2),
        loglik: sol.loglik,
        converged: sol.minimum.converged && sol.loglik.is_finite(),
        iterations: sol.minimum.iterations,
        gradient_norm: sol.minimum.grad_norm,
        nodes_b: objective.nodes().len(),
        seed: objective.nodes().seed(),
        tau2_fixed: options.tau2_fixed.is_some(),
        warnings,
    })
}

/// Maximizes the likelihood with coefficient `pinned` held at `value`,
/// warm-started from `init`.
pub fn fit_constrained(
    dataset: &Dataset,
    nodes: &NodeSet,
    pinned: usize,
    value: f64,
    init: &StartValues,
    options: &FitOptions,
) -> Result<ConstrainedFit> {
    let objective = Objective::new(dataset, nodes)?;
    fit_constrained_with(&objective, pinned, value, init, options)
}

pub fn fit_constrained_with(
    objective: &Objective,
    pinned: usize,
    value: f64,
    init: &StartValues,
    options: &FitOptions,
) -> Result<ConstrainedFit> {
    let p = objective.dataset().p();
    if pinned >= p {
        return Err(Error::InvalidArgument(format!(
            "coefficient index {pinned} out of range for p = {p}"
        )));
    }
    if !value.is_finite() {
        return Err(Error::ConstrainedFit {
            value,
            message: "pinned value is not finite".into(),
        });
    }
    let sol = maximize(objective, Some((pinned, value)), options.tau2_fixed, init, &options.optim)
        .map_err(|e| Error::ConstrainedFit {
            value,
            message: e.to_string(),
        })?;
    Ok(ConstrainedFit {
        pinned_index: pinned,
        pinned_value: value,
        beta: sol.beta,
        tau2_tilde: options.tau2_fixed.unwrap_or(sol.tau2),
        loglik: sol.loglik,
        converged: sol.minimum.converged,
        iterations: sol.minimum.iterations,
    })
}

/// Wald standard errors of `beta` from the observed information at fixed
/// `tau^2`. Used to scale interval searches.
pub fn beta_standard_errors(objective: &Objective, fit: &ModelFit) -> Vec<f64> {
    let tau = fit.tau2_hat.sqrt();
    let mut f = |b: &[f64]| -objective.centered(b, tau);
    let h = optim::numerical_hessian(&mut f, &fit.beta_hat);
    match linalg::invert(&h) {
        Some(inv) => (0..fit.beta_hat.len())
            .map(|i| {
                let v = inv[i][i];
                if v > 0.0 && v.is_finite() {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect(),
        None => vec![f64::NAN; fit.beta_hat.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Size, StudyRecord};
    use crate::family::FamilySpec;

    fn binomial(rows: &[(u64, u64)]) -> Dataset {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(n, y))| StudyRecord {
                study_id: format!("s{i}"),
                record_id: format!("s{i}"),
                arm: None,
                x: vec![1.0],
                size: Size::Subjects(n),
                ybar: y as f64 / n as f64,
                s2: None,
                phi_hat: Some(1.0),
            })
            .collect();
        Dataset::new(FamilySpec::binomial(), records, vec!["(Intercept)".into()]).unwrap()
    }

    #[test]
    fn single_record_matches_study_loglik() {
        let d = binomial(&[(10, 3), (12, 4)]);
        let nodes = NodeSet::sobol(256, 0).unwrap();
        let one = Dataset {
            records: vec![d.records[0].clone()],
            ..d.clone()
        };
        let a = total_loglik(&one, &[0.2], 0.5, &nodes).unwrap();
        let b = crate::qmc::marginal_loglik_study(&d.records[0], d.family, &[0.2], 0.5, &nodes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicated_dataset_doubles() {
        let d = binomial(&[(10, 3), (12, 4), (30, 2)]);
        let mut dup = d.clone();
        dup.records.extend(d.records.clone());
        let nodes = NodeSet::sobol(512, 3).unwrap();
        let a = total_loglik(&d, &[-1.0], 0.8, &nodes).unwrap();
        let b = total_loglik(&dup, &[-1.0], 0.8, &nodes).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn identical_records_with_zero_tau_solve_score_equation() {
        let d = binomial(&[(20, 5), (20, 5), (20, 5)]);
        let nodes = NodeSet::sobol(64, 0).unwrap();
        let fit = fit_mle(
            &d,
            &nodes,
            &FitOptions {
                tau2_fixed: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.tau2_hat, 0.0);
        // b'(beta) = ybar  =>  beta = logit(0.25)
        assert!((fit.beta_hat[0] - (0.25f64 / 0.75).ln()).abs() < 1e-6);
    }

    #[test]
    fn constrained_at_mle_is_inactive() {
        let d = binomial(&[(40, 5), (60, 12), (25, 1), (80, 20), (33, 3)]);
        let nodes = NodeSet::sobol(1024, 0).unwrap();
        let fit = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let c = fit_constrained(&d, &nodes, 0, fit.beta_hat[0], &fit.start(), &FitOptions::default()).unwrap();
        assert!((c.loglik - fit.loglik).abs() < 1e-8, "{} vs {}", c.loglik, fit.loglik);
        let far = fit_constrained(&d, &nodes, 0, fit.beta_hat[0] + 1.5, &fit.start(), &FitOptions::default()).unwrap();
        assert!(far.loglik < fit.loglik - 1e-3);
        assert!(far.loglik <= fit.loglik + 1e-8);
    }

    #[test]
    fn fits_are_deterministic() {
        let d = binomial(&[(40, 5), (60, 12), (25, 1), (80, 20)]);
        let nodes = NodeSet::sobol(512, 11).unwrap();
        let a = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
        let b = fit_mle(&d, &nodes, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_pinned_index() {
        let d = binomial(&[(10, 3), (12, 4)]);
        let nodes = NodeSet::sobol(64, 0).unwrap();
        let s = StartValues { beta: vec![0.0], tau2: 0.1 };
        assert!(fit_constrained(&d, &nodes, 3, 0.0, &s, &FitOptions::default()).is_err());
    }
}
