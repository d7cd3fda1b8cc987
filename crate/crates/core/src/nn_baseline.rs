//! Normal-normal baselines on link-scale study estimates: DerSimonian-Laird,
//! Wald tests, the closed-form profile likelihood with the Bartlett term, and
//! an exact small-sample bias oracle for the log odds ratio.

use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, StudyRecord};
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::inference::{self, BoundFlag, IntervalResult, Method, TracePoint};
use crate::linalg;
use crate::scalar::brent_minimize;
use crate::special::{chi2_1_upper_quantile, norm_cdf, norm_quantile};

/// Correction added to every cell of a study with a zero cell.
pub const CONTINUITY: f64 = 0.5;

/// When the continuity correction is applied to count data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuityPolicy {
    /// Only to studies with a zero cell.
    #[default]
    ZeroOnly,
    /// To every study.
    Always,
}

/// Variance convention for the log of a gamma sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaVariance {
    /// `s^2 / (n ybar^2)`, the delta-method variance of `log ybar`.
    #[default]
    SampleMean,
    /// `s^2 / ybar^2`, the plug-in dispersion.
    Dispersion,
}

/// Link-scale estimates with their within-study variances.
#[derive(Debug, Clone, PartialEq)]
pub struct NNInput {
    pub theta_hat: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Design matrix, one row per estimate. `None` means intercept only.
    pub x: Option<Vec<Vec<f64>>>,
}

impl NNInput {
    pub fn new(theta_hat: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        Self::build(theta_hat, sigma2, None)
    }

    pub fn with_covariates(theta_hat: Vec<f64>, sigma2: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(theta_hat, sigma2, Some(x))
    }

    fn build(theta_hat: Vec<f64>, sigma2: Vec<f64>, x: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if theta_hat.len() != sigma2.len() {
            return Err(Error::InvalidArgument(format!(
                "{} estimates but {} variances",
                theta_hat.len(),
                sigma2.len()
            )));
        }
        if theta_hat.len() < 2 {
            return Err(Error::InvalidArgument("need at least two estimates".into()));
        }
        if let Some(v) = sigma2.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("within-study variance must be positive, got {v}")));
        }
        if theta_hat.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite estimate".into()));
        }
        if let Some(x) = &x {
            let p = x.first().map_or(0, Vec::len);
            if x.len() != theta_hat.len() || p == 0 || x.iter().any(|r| r.len() != p) {
                return Err(Error::InvalidArgument("design matrix shape does not match estimates".into()));
            }
        }
        Ok(Self { theta_hat, sigma2, x })
    }

    pub fn len(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_hat.is_empty()
    }

    pub fn p(&self) -> usize {
        self.x.as_ref().map_or(1, |x| x[0].len())
    }

    pub fn design(&self) -> Vec<Vec<f64>> {
        match &self.x {
            Some(x) => x.clone(),
            None => vec![vec![1.0]; self.len()],
        }
    }
}

/// Link-scale estimate and variance for one record.
pub fn record_estimate(
    record: &StudyRecord,
    kind: FamilyKind,
    policy: ContinuityPolicy,
    gamma: GammaVariance,
) -> Result<(f64, f64)> {
    let fail = |message: &str| Error::InvalidRecord {
        record: record.record_id.clone(),
        message: message.to_string(),
    };
    match kind {
        FamilyKind::Binomial => {
            let n = record.weight();
            let y = record.events().round();
            let zero = y == 0.0 || y == n;
            Ok(log_odds(y, n, correction(policy, zero)))
        }
        FamilyKind::Poisson => {
            let e = record.events();
            let zero = e == 0.0;
            Ok(log_rate(e, record.weight(), correction(policy, zero)))
        }
        FamilyKind::Gamma => {
            let s2 = record.s2.ok_or_else(|| fail("gamma records need a sample variance"))?;
            let m = record.ybar;
            if !(m > 0.0) {
                return Err(fail("gamma mean must be positive"));
            }
            let v = match gamma {
                GammaVariance::SampleMean => s2 / (record.weight() * m * m),
                GammaVariance::Dispersion => s2 / (m * m),
            };
            Ok((m.ln(), v))
        }
        FamilyKind::Normal => {
            let v = record.s2.ok_or_else(|| fail("normal records need a variance"))?;
            Ok((record.ybar, v))
        }
    }
}

fn correction(policy: ContinuityPolicy, zero: bool) -> f64 {
    match policy {
        ContinuityPolicy::Always => CONTINUITY,
        ContinuityPolicy::ZeroOnly if zero => CONTINUITY,
        ContinuityPolicy::ZeroOnly => 0.0,
    }
}

fn log_odds(y: f64, n: f64, a: f64) -> (f64, f64) {
    (
        ((y + a) / (n - y + a)).ln(),
        1.0 / (y + a) + 1.0 / (n - y + a),
    )
}

fn log_rate(e: f64, t: f64, a: f64) -> (f64, f64) {
    (((e + a) / t).ln(), 1.0 / (e + a))
}

/// Per-record link-scale estimates and variances, corrected only at zero
/// cells. Used for starting values.
pub fn link_scale_estimates(dataset: &Dataset) -> (Vec<f64>, Vec<f64>) {
    dataset
        .records
        .iter()
        .map(|r| {
            record_estimate(r, dataset.family.kind(), ContinuityPolicy::ZeroOnly, GammaVariance::SampleMean)
                .unwrap_or((0.0, 1.0))
        })
        .unzip()
}

/// Normal-normal input from a dataset.
///
/// Two-arm data become per-study treatment-minus-control contrasts whose
/// design holds an intercept plus any study-level covariates; otherwise each
/// record contributes its own estimate with its full design row. For
/// binomial contrasts the correction goes on all four cells when any is zero.
pub fn nn_input(dataset: &Dataset, policy: ContinuityPolicy) -> Result<NNInput> {
    let kind = dataset.family.kind();
    if let (Some(pairs), Some(arm_col)) = (dataset.arm_pairs(), dataset.arm_column()) {
        let mut theta = Vec::with_capacity(pairs.len());
        let mut var = Vec::with_capacity(pairs.len());
        let mut x = Vec::with_capacity(pairs.len());
        for (t, c) in pairs {
            let (rt, rc) = (&dataset.records[t], &dataset.records[c]);
            let (et, vt, ec, vc) = if kind == FamilyKind::Binomial {
                let (nt, nc) = (rt.weight(), rc.weight());
                let (yt, yc) = (rt.events().round(), rc.events().round());
                let zero = yt == 0.0 || yt == nt || yc == 0.0 || yc == nc;
                let a = correction(policy, zero);
                let (et, vt) = log_odds(yt, nt, a);
                let (ec, vc) = log_odds(yc, nc, a);
                (et, vt, ec, vc)
            } else if kind == FamilyKind::Poisson {
                let zero = rt.events() == 0.0 || rc.events() == 0.0;
                let a = correction(policy, zero);
                let (et, vt) = log_rate(rt.events(), rt.weight(), a);
                let (ec, vc) = log_rate(rc.events(), rc.weight(), a);
                (et, vt, ec, vc)
            } else {
                let (et, vt) = record_estimate(rt, kind, policy, GammaVariance::SampleMean)?;
                let (ec, vc) = record_estimate(rc, kind, policy, GammaVariance::SampleMean)?;
                (et, vt, ec, vc)
            };
            theta.push(et - ec);
            var.push(vt + vc);
            let mut row = vec![1.0];
            row.extend(
                rt.x.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 0 && *i != arm_col)
                    .map(|(_, v)| *v),
            );
            x.push(row);
        }
        return if x[0].len() == 1 {
            NNInput::new(theta, var)
        } else {
            NNInput::with_covariates(theta, var, x)
        };
    }
    let mut theta = Vec::with_capacity(dataset.len());
    let mut var = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let (e, v) = record_estimate(r, kind, policy, GammaVariance::SampleMean)?;
        theta.push(e);
        var.push(v);
    }
    if dataset.p() == 1 {
        NNInput::new(theta, var)
    } else {
        NNInput::with_covariates(theta, var, dataset.records.iter().map(|r| r.x.clone()).collect())
    }
}

/// DerSimonian-Laird random-effects estimate of a common mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlEstimate {
    pub theta: f64,
    pub tau2: f64,
    pub se: f64,
    /// Cochran's heterogeneity statistic.
    pub q: f64,
}

impl DlEstimate {
    pub fn wald_interval(&self, level: f64) -> (f64, f64) {
        let z = norm_quantile(0.5 + 0.5 * level);
        (self.theta - z * self.se, self.theta + z * self.se)
    }
}

/// DerSimonian-Laird estimate of the intercept-only model. Covariates in the
/// input are ignored.
pub fn dl_estimate(input: &NNInput) -> DlEstimate {
    let x = vec![vec![1.0]; input.len()];
    let fit = dl_regression(&input.theta_hat, &input.sigma2, &x).expect("intercept-only design is full rank");
    DlEstimate {
        theta: fit.beta[0],
        tau2: fit.tau2,
        se: fit.se[0],
        q: fit.q,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlRegression {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub tau2: f64,
    pub q: f64,
}

/// Method-of-moments meta-regression. `tau^2 = max(0, (Q - (K - p)) / c)`
/// with `c = tr W - tr((X'WX)^{-1} X'W^2 X)` at fixed-effect weights, which
/// reduces to the usual DerSimonian-Laird estimator for `p = 1`.
pub fn dl_regression(theta: &[f64], var: &[f64], x: &[Vec<f64>]) -> Option<DlRegression> {
    let k = theta.len();
    let p = x.first()?.len();
    if k <= p {
        return None;
    }
    let w: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let (b_fe, inv) = linalg::weighted_least_squares(x, theta, &w)?;
    let q: f64 = (0..k)
        .map(|i| {
            let r = theta[i] - crate::family::dot(&x[i], &b_fe);
            w[i] * r * r
        })
        .sum();
    let mut xtw2x = vec![vec![0.0; p]; p];
    for (row, &wk) in x.iter().zip(&w) {
        for a in 0..p {
            for b in 0..p {
                xtw2x[a][b] += wk * wk * row[a] * row[b];
            }
        }
    }
    let mut trace = 0.0;
    for a in 0..p {
        for b in 0..p {
            trace += inv[a][b] * xtw2x[b][a];
        }
    }
    let c = w.iter().sum::<f64>() - trace;
    let tau2 = if c > 0.0 {
        ((q - (k - p) as f64) / c).max(0.0)
    } else {
        0.0
    };
    let wr: Vec<f64> = var.iter().map(|v| 1.0 / (v + tau2)).collect();
    let (beta, cov) = linalg::weighted_least_squares(x, theta, &wr)?;
    let se = (0..p).map(|i| cov[i][i].sqrt()).collect();
    Some(DlRegression { beta, se, tau2, q })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// `T_K = sum w_k (theta_k - theta0) / sqrt(sum w_k)` with weights at the
/// DerSimonian-Laird `tau^2`.
pub fn wald_test(input: &NNInput, theta0: f64) -> WaldTest {
    wald_test_known(input, dl_estimate(input).tau2, theta0)
}

/// The Wald test with weights at a given `tau^2`.
pub fn wald_test_known(input: &NNInput, tau2: f64, theta0: f64) -> WaldTest {
    let mut num = 0.0;
    let mut sw = 0.0;
    for (t, v) in input.theta_hat.iter().zip(&input.sigma2) {
        let w = 1.0 / (v + tau2);
        num += w * (t - theta0);
        sw += w;
    }
    let statistic = num / sw.sqrt();
    WaldTest {
        statistic,
        p_value: 2.0 * norm_cdf(-statistic.abs()),
    }
}

/// Normal-normal log-likelihood, `theta_k ~ N(x_k'beta, sigma_k^2 + tau^2)`.
pub fn nn_loglik(input: &NNInput, beta: &[f64], tau2: f64) -> f64 {
    let x = input.design();
    let mut ll = 0.0;
    for ((t, v), row) in input.theta_hat.iter().zip(&input.sigma2).zip(&x) {
        let var = v + tau2;
        let r = t - crate::family::dot(row, beta);
        ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + r * r / var);
    }
    ll
}

#[derive(Debug, Clone, PartialEq)]
pub struct NNFit {
    pub beta: Vec<f64>,
    pub tau2: f64,
    pub loglik: f64,
}

/// Maximizes the normal-normal likelihood, optionally with coefficient
/// `pinned.0` held at `pinned.1`. For fixed `tau^2` the remaining
/// coefficients are a weighted least-squares fit; `tau^2` is found on a
/// square-root grid and refined with Brent's method.
pub fn nn_fit(input: &NNInput, pinned: Option<(usize, f64)>) -> Result<NNFit> {
    let x = input.design();
    let p = input.p();
    if let Some((j, _)) = pinned {
        if j >= p {
            return Err(Error::InvalidArgument(format!("coefficient index {j} out of range for p = {p}")));
        }
    }
    let free: Vec<usize> = (0..p).filter(|&i| Some(i) != pinned.map(|(j, _)| j)).collect();
    let y: Vec<f64> = match pinned {
        Some((j, v)) => input.theta_hat.iter().zip(&x).map(|(t, r)| t - r[j] * v).collect(),
        None => input.theta_hat.clone(),
    };
    let xf: Vec<Vec<f64>> = x.iter().map(|r| free.iter().map(|&i| r[i]).collect()).collect();

    let beta_at = |tau2: f64| -> Option<Vec<f64>> {
        let mut beta = vec![0.0; p];
        if let Some((j, v)) = pinned {
            beta[j] = v;
        }
        if !free.is_empty() {
            let w: Vec<f64> = input.sigma2.iter().map(|v| 1.0 / (v + tau2)).collect();
            let (b, _) = linalg::weighted_least_squares(&xf, &y, &w)?;
            for (slot, &i) in free.iter().enumerate() {
                beta[i] = b[slot];
            }
        }
        Some(beta)
    };
    let profile = |tau: f64| -> f64 {
        let tau2 = tau * tau;
        match beta_at(tau2) {
            Some(b) => -nn_loglik(input, &b, tau2),
            None => f64::INFINITY,
        }
    };

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).powi(2)).fold(0.0, f64::max);
    let vmax = input.sigma2.iter().cloned().fold(0.0, f64::max);
    let tau_max = (4.0 * (spread + vmax)).sqrt().max(1e-3);
    const GRID: usize = 64;
    let taus: Vec<f64> = (0..=GRID).map(|i| tau_max * i as f64 / GRID as f64).collect();
    let values: Vec<f64> = taus.iter().map(|&t| profile(t)).collect();
    let best = (0..=GRID).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let lo = taus[best.saturating_sub(1)];
    let hi = taus[(best + 1).min(GRID)];
    let (mut tau, mut f) = brent_minimize(profile, lo, hi, 1e-10, 200);
    if values[best] < f {
        tau = taus[best];
        f = values[best];
    }
    let tau2 = tau * tau;
    let beta = beta_at(tau2).ok_or_else(|| Error::InvalidArgument("singular design".into()))?;
    Ok(NNFit {
        beta,
        tau2,
        loglik: -f,
    })
}

pub fn nn_mle(input: &NNInput) -> Result<NNFit> {
    nn_fit(input, None)
}

/// Closed-form profile likelihood ratio statistic for coefficient `index`.
pub fn nn_profile_lr(input: &NNInput, mle: &NNFit, index: usize, value: f64) -> Result<(f64, f64)> {
    let c = nn_fit(input, Some((index, value)))?;
    Ok(((2.0 * (mle.loglik - c.loglik)).max(0.0), c.tau2))
}

/// Profile-likelihood interval for one coefficient of the normal-normal
/// model, uncorrected or with the Bartlett term.
pub fn nn_interval(input: &NNInput, index: usize, level: f64, method: Method) -> Result<IntervalResult> {
    inference::check_level(level)?;
    let mle = nn_mle(input)?;
    if index >= input.p() {
        return Err(Error::InvalidArgument(format!("coefficient index {index} out of range")));
    }
    let estimate = mle.beta[index];
    let cutoff = chi2_1_upper_quantile(1.0 - level);
    let se = nn_standard_error(input, mle.tau2, index);
    let c_hat = inference::bartlett_c(&input.sigma2, mle.tau2)?;
    let mut trace = Vec::new();
    let stat = |v: f64, corrected: bool, trace: &mut Vec<TracePoint>| -> Result<f64> {
        let (t, tau2) = nn_profile_lr(input, &mle, index, v)?;
        let c = inference::bartlett_c(&input.sigma2, tau2)?;
        let tt = inference::corrected_lr(t, c);
        trace.push(TracePoint {
            value: v,
            lr: t,
            corrected: tt,
            tau2,
        });
        Ok(if corrected { tt } else { t })
    };
    let step = inference::search_step(se, estimate);
    let mut bounds = [(0.0, BoundFlag::Converged); 2];
    for (slot, dir) in [(0usize, -1.0), (1, 1.0)] {
        let pl = inference::search_bound(
            &mut |v| stat(v, false, &mut trace),
            estimate,
            0.0,
            step,
            dir,
            cutoff,
        );
        bounds[slot] = match method {
            Method::Pl => pl,
            Method::Plsbc => inference::continue_corrected(pl, estimate, step, dir, cutoff, &mut |v| {
                stat(v, true, &mut trace)
            }),
        };
    }
    trace.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(IntervalResult {
        index,
        estimate,
        method,
        level,
        lower: bounds[0].0,
        upper: bounds[1].0,
        bartlett_c: c_hat,
        flags: [bounds[0].1, bounds[1].1],
        trace,
    })
}

/// The Bartlett-corrected normal-normal interval for the pooled effect.
pub fn nn_plbc_interval(input: &NNInput, level: f64) -> Result<IntervalResult> {
    nn_interval(input, 0, level, Method::Plsbc)
}

fn nn_standard_error(input: &NNInput, tau2: f64, index: usize) -> f64 {
    let w: Vec<f64> = input.sigma2.iter().map(|v| 1.0 / (v + tau2)).collect();
    match linalg::weighted_least_squares(&input.design(), &input.theta_hat, &w) {
        Some((_, cov)) => cov[index][index].sqrt(),
        None => f64::NAN,
    }
}

/// Exact finite-sample bias of the corrected log odds ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasOracle {
    /// `E[log OR_a] - theta`.
    pub bias: f64,
    /// Set when `a = 0` and outcomes with an infinite log odds ratio were
    /// excluded, making `bias` a conditional expectation.
    pub conditional: bool,
    /// Probability mass of the excluded outcomes.
    pub excluded: f64,
}

/// Enumerates all `(n0 + 1)(n1 + 1)` outcome pairs of a two-arm binomial
/// study with control log odds `mu` and log odds ratio `theta`, and returns
/// the bias of `log((y1+a)(n0-y0+a) / ((n1-y1+a)(y0+a)))`.
pub fn log_or_bias_oracle(n0: u32, n1: u32, mu: f64, theta: f64, a: f64) -> Result<BiasOracle> {
    if n0 == 0 || n1 == 0 || n0 > 500 || n1 > 500 {
        return Err(Error::InvalidArgument(format!("arm sizes must be in 1..=500, got ({n0}, {n1})")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("continuity correction must be in [0, 1], got {a}")));
    }
    if !mu.is_finite() || !theta.is_finite() {
        return Err(Error::InvalidArgument("mu and theta must be finite".into()));
    }
    let pmf0 = binomial_pmf(n0, mu);
    let pmf1 = binomial_pmf(n1, mu + theta);
    let logit = |y: u32, n: u32| ((y as f64 + a) / ((n - y) as f64 + a)).ln();
    let mut mass = 0.0;
    let mut sum = 0.0;
    for (y0, p0) in pmf0.iter().enumerate() {
        let y0 = y0 as u32;
        if a == 0.0 && (y0 == 0 || y0 == n0) {
            continue;
        }
        let l0 = logit(y0, n0);
        for (y1, p1) in pmf1.iter().enumerate() {
            let y1 = y1 as u32;
            if a == 0.0 && (y1 == 0 || y1 == n1) {
                continue;
            }
            let p = p0 * p1;
            mass += p;
            sum += p * (logit(y1, n1) - l0);
        }
    }
    let excluded = (1.0 - mass).max(0.0);
    Ok(BiasOracle {
        bias: sum / mass - theta,
        conditional: a == 0.0 && excluded > 0.0,
        excluded,
    })
}

fn binomial_pmf(n: u32, logit_p: f64) -> Vec<f64> {
    let log_p = -crate::special::softplus(-logit_p);
    let log_q = -crate::special::softplus(logit_p);
    let nf = n as f64;
    (0..=n)
        .map(|y| {
            let y = y as f64;
            (ln_gamma(nf + 1.0) - ln_gamma(y + 1.0) - ln_gamma(nf - y + 1.0) + y * log_p + (nf - y) * log_q).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_study_hand_example() {
        let input = NNInput::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let dl = dl_estimate(&input);
        assert!((dl.q - 0.5).abs() < 1e-15);
        assert_eq!(dl.tau2, 0.0);
        assert!((dl.theta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_variances_give_arithmetic_mean() {
        let t = vec![0.1, -0.4, 0.9, 0.3];
        let input = NNInput::new(t.clone(), vec![0.2; 4]).unwrap();
        let dl = dl_estimate(&input);
        assert!((dl.theta - t.iter().sum::<f64>() / 4.0).abs() < 1e-14);
    }

    #[test]
    fn wald_at_estimate_is_zero() {
        let input = NNInput::new(vec![0.1, -0.4, 0.9, 0.3], vec![0.2, 0.1, 0.3, 0.05]).unwrap();
        let dl = dl_estimate(&input);
        let w = wald_test(&input, dl.theta);
        assert!(w.statistic.abs() < 1e-12);
        assert!((w.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_arm_variance() {
        let (_, v) = log_odds(3.0, 10.0, 0.0);
        assert!((v - (1.0 / 3.0 + 1.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn regression_reduces_to_dl() {
        let t = vec![0.3, -0.1, 0.8, 0.2, 0.5];
        let v = vec![0.1, 0.2, 0.05, 0.3, 0.15];
        let x = vec![vec![1.0]; 5];
        let r = dl_regression(&t, &v, &x).unwrap();
        let d = dl_estimate(&NNInput::new(t, v).unwrap());
        assert!((r.beta[0] - d.theta).abs() < 1e-14);
        assert!((r.tau2 - d.tau2).abs() < 1e-14);
    }

    #[test]
    fn nn_mle_matches_score_equations() {
        let input = NNInput::new(vec![0.3, -0.5, 0.8, 0.2, 1.1, -0.2], vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.1]).unwrap();
        let fit = nn_mle(&input).unwrap();
        assert!(fit.tau2 > 0.0);
        // d/dtau2 of the log-likelihood vanishes at an interior maximum
        let g: f64 = input
            .theta_hat
            .iter()
            .zip(&input.sigma2)
            .map(|(t, v)| {
                let var = v + fit.tau2;
                0.5 * ((t - fit.beta[0]).powi(2) / (var * var) - 1.0 / var)
            })
            .sum();
        assert!(g.abs() < 1e-6, "{g}");
    }

    #[test]
    fn symmetric_interval_at_zero_tau() {
        // Identical estimates force tau2 = 0 along the profile.
        let input = NNInput::new(vec![0.4; 5], vec![0.2; 5]).unwrap();
        let r = nn_plbc_interval(&input, 0.95).unwrap();
        assert!(((r.upper - r.estimate) - (r.estimate - r.lower)).abs() < 1e-3);
    }

    #[test]
    fn oracle_symmetry() {
        let b = log_or_bias_oracle(30, 30, 0.0, 0.0, 0.5).unwrap();
        assert!(b.bias.abs() < 1e-12);
        assert!(!b.conditional);
        let b = log_or_bias_oracle(30, 30, -1.0, 0.5, 0.0).unwrap();
        assert!(b.conditional && b.excluded > 0.0);
    }
}
