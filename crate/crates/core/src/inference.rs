//! Profile likelihood ratio statistics, the simplified Bartlett correction,
//! and confidence intervals for single coefficients of the GLMM.

use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{self, ConstrainedFit, FitOptions, ModelFit, Objective, StartValues};
use crate::nn_baseline::{self, ContinuityPolicy, GammaVariance};
use crate::qmc::NodeSet;
use crate::scalar::brent_root;
use crate::special::chi2_1_upper_quantile;

/// Doubling steps allowed while bracketing an endpoint.
pub const MAX_BRACKET: usize = 40;
/// A flat statistic only counts as a plateau once the bracketing step has
/// grown past this multiple of the initial step.
const PLATEAU_MIN_STEPS: f64 = 128.0;
/// Root tolerance on the statistic scale.
pub const ROOT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Profile likelihood.
    Pl,
    /// Profile likelihood with the simplified Bartlett correction.
    Plsbc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pl => "PL",
            Method::Plsbc => "PLSBC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFlag {
    Converged,
    /// The statistic levels off below the cutoff; the bound is infinite.
    Unbounded,
    /// Bracketing gave up (step cap or failed evaluation); the bound is the
    /// last point known to lie inside the region.
    MaxBracket,
}

impl fmt::Display for BoundFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundFlag::Converged => "Converged",
            BoundFlag::Unbounded => "Unbounded",
            BoundFlag::MaxBracket => "MaxBracket",
        })
    }
}

/// One evaluation of the profile statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub value: f64,
    pub lr: f64,
    pub corrected: f64,
    /// Constrained `tau^2` at `value`.
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub index: usize,
    pub estimate: f64,
    pub method: Method,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// Bartlett term at the unconstrained `tau^2`.
    pub bartlett_c: f64,
    /// Lower and upper bound status.
    pub flags: [BoundFlag; 2],
    /// Statistic evaluations, sorted by pinned value.
    pub trace: Vec<TracePoint>,
}

impl IntervalResult {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn converged(&self) -> bool {
        self.flags.iter().all(|f| *f == BoundFlag::Converged)
    }

    /// True when no bound gave up; unbounded sides are allowed.
    pub fn usable(&self) -> bool {
        self.flags.iter().all(|f| *f != BoundFlag::MaxBracket)
    }
}

/// `C = sum V^-3 / (sum V^-1 * sum V^-2)` with `V_k = sigma_k^2 + tau^2`.
pub fn bartlett_c(sigma2: &[f64], tau2: f64) -> Result<f64> {
    if sigma2.is_empty() {
        return Err(Error::InvalidArgument("no variances".into()));
    }
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for &s in sigma2 {
        let v = s + tau2;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "total variance must be positive, got sigma2 = {s}, tau2 = {tau2}"
            )));
        }
        let w = 1.0 / v;
        s1 += w;
        s2 += w * w;
        s3 += w * w * w;
    }
    Ok(s3 / (s1 * s2))
}

pub fn corrected_lr(t: f64, c: f64) -> f64 {
    t / (1.0 + 2.0 * c)
}

/// Plug-in variance of each record's link-scale estimate, corrected only at
/// boundary counts.
pub fn within_study_variances(dataset: &Dataset, gamma: GammaVariance) -> Result<Vec<f64>> {
    let kind = dataset.family.kind();
    dataset
        .records
        .iter()
        .map(|r| nn_baseline::record_estimate(r, kind, ContinuityPolicy::ZeroOnly, gamma).map(|(_, v)| v))
        .collect()
}

/// Variances entering the GLMM Bartlett term. Gamma records use the plug-in
/// dispersion `s^2 / ybar^2`.
pub fn glmm_bartlett_variances(dataset: &Dataset) -> Result<Vec<f64>> {
    within_study_variances(dataset, GammaVariance::Dispersion)
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.5 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must be in (0.5, 1), got {level}")))
    }
}

pub(crate) fn search_step(se: f64, estimate: f64) -> f64 {
    if se.is_finite() && se > 0.0 {
        0.5 * se
    } else {
        0.1 * (1.0 + estimate.abs())
    }
}

/// Walks outward from `inside` (where the statistic is `inside_value`, below
/// `cutoff`) in direction `dir`, doubling the step until the statistic
/// crosses the cutoff, then refines the crossing with Brent's method.
pub(crate) fn search_bound<F>(
    stat: &mut F,
    inside: f64,
    inside_value: f64,
    step: f64,
    dir: f64,
    cutoff: f64,
) -> (f64, BoundFlag)
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut a = inside;
    let mut fa = inside_value;
    let mut s = step;
    let mut flat = 0;
    for _ in 0..MAX_BRACKET {
        let b = a + dir * s;
        let fb = match stat(b) {
            Ok(v) if v.is_finite() => v,
            _ => return (a, BoundFlag::MaxBracket),
        };
        if fb >= cutoff {
            let root = brent_root(
                |v| stat(v).map(|t| t - cutoff),
                a,
                b,
                fa - cutoff,
                fb - cutoff,
                ROOT_TOL,
                1e-10,
                100,
            );
            return match root {
                Ok((x, fx)) if fx.abs() <= ROOT_TOL || (x - a).abs() < 1e-9 || (x - b).abs() < 1e-9 => {
                    (x, BoundFlag::Converged)
                }
                _ => (a, BoundFlag::MaxBracket),
            };
        }
        if (fb - fa).abs() < 1e-6 {
            flat += 1;
            if flat >= 3 && s >= PLATEAU_MIN_STEPS * step {
                return (dir * f64::INFINITY, BoundFlag::Unbounded);
            }
        } else {
            flat = 0;
        }
        a = b;
        fa = fb;
        s *= 2.0;
    }
    (a, BoundFlag::MaxBracket)
}

/// Continues a corrected-statistic search outward from an uncorrected bound.
/// The corrected statistic is below the cutoff there, so the corrected bound
/// always lies at or beyond the uncorrected one.
pub(crate) fn continue_corrected<F>(
    pl: (f64, BoundFlag),
    estimate: f64,
    step: f64,
    dir: f64,
    cutoff: f64,
    stat: &mut F,
) -> (f64, BoundFlag)
where
    F: FnMut(f64) -> Result<f64>,
{
    match pl.1 {
        BoundFlag::Unbounded => pl,
        BoundFlag::Converged => match stat(pl.0) {
            Ok(v) if v.is_finite() && v < cutoff => search_bound(stat, pl.0, v, step, dir, cutoff),
            _ => (pl.0, BoundFlag::MaxBracket),
        },
        BoundFlag::MaxBracket => search_bound(stat, estimate, 0.0, step, dir, cutoff),
    }
}

/// Profile of one GLMM coefficient, caching constrained fits so that PL and
/// PLSBC searches share work and each fit warm-starts from its nearest
/// computed neighbour.
pub struct Profile<'a> {
    objective: Objective<'a>,
    fit: &'a ModelFit,
    index: usize,
    sigma2: Vec<f64>,
    options: FitOptions,
    cache: Vec<ConstrainedFit>,
    trace: Vec<TracePoint>,
}

impl<'a> Profile<'a> {
    pub fn new(dataset: &'a Dataset, nodes: &'a NodeSet, fit: &'a ModelFit, index: usize) -> Result<Self> {
        if index >= dataset.p() {
            return Err(Error::InvalidArgument(format!(
                "coefficient index {index} out of range for p = {}",
                dataset.p()
            )));
        }
        if fit.beta_hat.len() != dataset.p() {
            return Err(Error::InvalidArgument("fit does not match dataset".into()));
        }
        Ok(Self {
            objective: Objective::new(dataset, nodes)?,
            fit,
            index,
            sigma2: glmm_bartlett_variances(dataset)?,
            options: FitOptions {
                tau2_fixed: fit.tau2_fixed.then_some(fit.tau2_hat),
                ..FitOptions::default()
            },
            cache: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn estimate(&self) -> f64 {
        self.fit.beta_hat[self.index]
    }

    /// Constrained fit at `value`, computed at most once.
    pub fn constrained(&mut self, value: f64) -> Result<ConstrainedFit> {
        if let Some(c) = self.cache.iter().find(|c| c.pinned_value == value) {
            return Ok(c.clone());
        }
        let est = self.estimate();
        let start = self
            .cache
            .iter()
            .filter(|c| (c.pinned_value - value).abs() < (est - value).abs())
            .min_by(|a, b| (a.pinned_value - value).abs().total_cmp(&(b.pinned_value - value).abs()))
            .map(ConstrainedFit::start)
            .unwrap_or_else(|| {
                let mut s: StartValues = self.fit.start();
                s.tau2 = s.tau2.max(fit::TAU2_START_FLOOR);
                s
            });
        let c = fit::fit_constrained_with(&self.objective, self.index, value, &start, &self.options)?;
        self.cache.push(c.clone());
        Ok(c)
    }

    /// `T = 2 (l_max - l_c)`, clamped at zero.
    pub fn lr(&mut self, value: f64) -> Result<f64> {
        Ok(self.point(value)?.lr)
    }

    fn point(&mut self, value: f64) -> Result<TracePoint> {
        if let Some(p) = self.trace.iter().find(|p| p.value == value) {
            return Ok(*p);
        }
        let (lr, tau2) = if value == self.estimate() {
            (0.0, self.fit.tau2_hat)
        } else {
            let c = self.constrained(value)?;
            ((2.0 * (self.fit.loglik - c.loglik)).max(0.0), c.tau2_tilde)
        };
        let c = bartlett_c(&self.sigma2, tau2)?;
        let p = TracePoint {
            value,
            lr,
            corrected: corrected_lr(lr, c),
            tau2,
        };
        self.trace.push(p);
        Ok(p)
    }

    /// Returns `(T, C, T / (1 + 2C))` at `value`.
    pub fn corrected(&mut self, value: f64) -> Result<(f64, f64, f64)> {
        let p = self.point(value)?;
        Ok((p.lr, bartlett_c(&self.sigma2, p.tau2)?, p.corrected))
    }

    /// PL and PLSBC intervals at `level`, the latter continuing outward from
    /// the former.
    pub fn intervals(&mut self, level: f64) -> Result<(IntervalResult, IntervalResult)> {
        check_level(level)?;
        let cutoff = chi2_1_upper_quantile(1.0 - level);
        let est = self.estimate();
        let se = fit::beta_standard_errors(&self.objective, self.fit)[self.index];
        let step = search_step(se, est);
        let mut pl = [(0.0, BoundFlag::Converged); 2];
        let mut sbc = pl;
        for (slot, dir) in [(0usize, -1.0), (1, 1.0)] {
            pl[slot] = search_bound(&mut |v| self.point(v).map(|p| p.lr), est, 0.0, step, dir, cutoff);
            sbc[slot] = continue_corrected(pl[slot], est, step, dir, cutoff, &mut |v| {
                self.point(v).map(|p| p.corrected)
            });
        }
        let c_hat = bartlett_c(&self.sigma2, self.fit.tau2_hat)?;
        let mut trace = self.trace.clone();
        trace.sort_by(|a, b| a.value.total_cmp(&b.value));
        let make = |method, b: [(f64, BoundFlag); 2]| IntervalResult {
            index: self.index,
            estimate: est,
            method,
            level,
            lower: b[0].0,
            upper: b[1].0,
            bartlett_c: c_hat,
            flags: [b[0].1, b[1].1],
            trace: trace.clone(),
        };
        Ok((make(Method::Pl, pl), make(Method::Plsbc, sbc)))
    }
}

/// Profile-likelihood ratio statistic for coefficient `index` at `value`.
pub fn profile_lr(dataset: &Dataset, nodes: &NodeSet, fit: &ModelFit, index: usize, value: f64) -> Result<f64> {
    Profile::new(dataset, nodes, fit, index)?.lr(value)
}

/// Confidence interval for coefficient `index`. PLSBC is found by continuing
/// outward from the PL bounds.
pub fn confidence_interval(
    dataset: &Dataset,
    nodes: &NodeSet,
    fit: &ModelFit,
    index: usize,
    level: f64,
    method: Method,
) -> Result<IntervalResult> {
    let (pl, sbc) = confidence_intervals(dataset, nodes, fit, index, level)?;
    Ok(match method {
        Method::Pl => pl,
        Method::Plsbc => sbc,
    })
}

/// Both PL and PLSBC intervals from one profile.
pub fn confidence_intervals(
    dataset: &Dataset,
    nodes: &NodeSet,
    fit: &ModelFit,
    index: usize,
    level: f64,
) -> Result<(IntervalResult, IntervalResult)> {
    if !fit.converged {
        return Err(Error::InvalidArgument("the fit did not converge".into()));
    }
    Profile::new(dataset, nodes, fit, index)?.intervals(level)
}
