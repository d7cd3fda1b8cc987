//! Simulation harness: study generators, per-scenario replication engine and
//! long-format result files.
//!
//! Replication `r` of a scenario draws from its own ChaCha stream keyed by
//! `(seed, r)`, so results do not depend on how replications are scheduled.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Size, StudyRecord, INTERCEPT};
use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec};
use crate::fit::{fit_mle, FitOptions};
use crate::inference::confidence_intervals;
use crate::nn_baseline::{self, ContinuityPolicy, NNInput};
use crate::qmc::NodeSet;
use crate::special::{logistic, norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimMethod {
    /// DerSimonian-Laird with a Wald interval.
    #[serde(rename = "nDL")]
    NDl,
    /// Normal-normal profile likelihood with the Bartlett term.
    #[serde(rename = "nPLBC")]
    NPlbc,
    /// GLMM profile likelihood.
    #[serde(rename = "gPL")]
    GPl,
    /// GLMM profile likelihood with the simplified Bartlett correction.
    #[serde(rename = "gPLSBC")]
    GPlsbc,
}

impl SimMethod {
    pub const ALL: [SimMethod; 4] = [SimMethod::NDl, SimMethod::NPlbc, SimMethod::GPl, SimMethod::GPlsbc];

    pub fn name(self) -> &'static str {
        match self {
            SimMethod::NDl => "nDL",
            SimMethod::NPlbc => "nPLBC",
            SimMethod::GPl => "gPL",
            SimMethod::GPlsbc => "gPLSBC",
        }
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Scenario(format!("unknown method `{s}`")))
    }
}

/// One cell of a simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub family: FamilyKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau2: f64,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// Study sizes are the integer part of a uniform draw on this range.
    #[serde(default = "default_n_range")]
    pub n_range: (u64, u64),
    #[serde(rename = "reps")]
    pub replications: usize,
    #[serde(rename = "B", default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<SimMethod>,
    #[serde(default)]
    pub continuity: ContinuityPolicy,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_theta0() -> f64 {
    -2.0
}

fn default_n_range() -> (u64, u64) {
    (15, 150)
}

fn default_nodes() -> usize {
    1024
}

fn default_methods() -> Vec<SimMethod> {
    SimMethod::ALL.to_vec()
}

fn default_level() -> f64 {
    0.95
}

impl ScenarioSpec {
    pub fn new(family: FamilyKind, k: usize, tau2: f64, replications: usize, seed: u64) -> Self {
        Self {
            family,
            k,
            tau2,
            theta0: default_theta0(),
            n_range: default_n_range(),
            replications,
            nodes: default_nodes(),
            seed,
            methods: default_methods(),
            continuity: ContinuityPolicy::default(),
            level: default_level(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.k < 2 {
            return bad(format!("K must be at least 2, got {}", self.k));
        }
        if !(self.tau2 >= 0.0) || !self.tau2.is_finite() {
            return bad(format!("tau2 must be non-negative, got {}", self.tau2));
        }
        if !self.theta0.is_finite() {
            return bad("theta0 must be finite".into());
        }
        if self.replications == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.nodes < 2 {
            return bad(format!("B must be at least 2, got {}", self.nodes));
        }
        let (lo, hi) = self.n_range;
        if lo == 0 || hi <= lo {
            return bad(format!("n_range must satisfy 1 <= lo < hi, got ({lo}, {hi})"));
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return bad(format!("level must be in (0.5, 1), got {}", self.level));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Vec<ScenarioSpec>,
}

/// Parses `[[scenario]]` tables from TOML text.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioSpec>> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_string()))?;
    for s in &file.scenario {
        s.validate()?;
    }
    Ok(file.scenario)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>> {
    parse_scenarios(&std::fs::read_to_string(path)?)
}

/// Gamma dispersion of study `k` (1-based) out of `K`.
pub fn gamma_dispersion(k: usize, big_k: usize) -> f64 {
    (1.0 + 4.0 * (k as f64 - 1.0) / big_k as f64) / 3.0
}

/// Within-study variance used for simulated normal outcomes.
pub fn normal_variance(n: u64) -> f64 {
    4.0 / n as f64
}

/// Draws one study with `theta_k = theta0 + v_k`, `v_k ~ N(0, tau2)`.
/// `k` is the 1-based study index, used by the gamma dispersion schedule.
pub fn generate_study<R: Rng + ?Sized>(
    family: FamilyKind,
    theta0: f64,
    tau2: f64,
    k: usize,
    big_k: usize,
    n_range: (u64, u64),
    rng: &mut R,
) -> StudyRecord {
    let n = rng.random_range(n_range.0 as f64..n_range.1 as f64).floor() as u64;
    let v = if tau2 > 0.0 {
        Normal::new(0.0, tau2.sqrt()).expect("valid sd").sample(rng)
    } else {
        0.0
    };
    let theta = theta0 + v;
    let record_id = format!("k{k}");
    let base = StudyRecord {
        study_id: record_id.clone(),
        record_id,
        arm: None,
        x: vec![1.0],
        size: Size::Subjects(n),
        ybar: 0.0,
        s2: None,
        phi_hat: Some(1.0),
    };
    match family {
        FamilyKind::Binomial => {
            let count = Binomial::new(n, logistic(theta)).expect("valid probability").sample(rng);
            StudyRecord {
                ybar: count as f64 / n as f64,
                ..base
            }
        }
        FamilyKind::Poisson => {
            let t = n as f64;
            let events = Poisson::new(t * theta.exp()).expect("positive mean").sample(rng);
            StudyRecord {
                size: Size::PersonTime(t),
                ybar: events / t,
                ..base
            }
        }
        FamilyKind::Gamma => {
            let phi = gamma_dispersion(k, big_k);
            let mu = theta.exp();
            let dist = Gamma::new(1.0 / phi, phi * mu).expect("valid gamma");
            let draws: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let s2 = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            StudyRecord {
                ybar: mean,
                s2: Some(s2),
                phi_hat: Some(s2 / (mean * mean)),
                ..base
            }
        }
        FamilyKind::Normal => {
            let var = normal_variance(n);
            let y = Normal::new(theta, var.sqrt()).expect("valid sd").sample(rng);
            StudyRecord {
                size: Size::Subjects(1),
                ybar: y,
                s2: Some(var),
                phi_hat: Some(var),
                ..base
            }
        }
    }
}

/// Random stream for replication `r` of a scenario seeded with `seed`.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Draws the `K` studies of one replication.
pub fn generate_dataset(spec: &ScenarioSpec, r: u64) -> Dataset {
    let mut rng = replication_rng(spec.seed, r);
    let records = (1..=spec.k)
        .map(|k| generate_study(spec.family, spec.theta0, spec.tau2, k, spec.k, spec.n_range, &mut rng))
        .collect();
    Dataset::new(FamilySpec::of(spec.family), records, vec![INTERCEPT.to_string()])
        .expect("generated records are valid")
}

/// One method's result in one replication. `None` marks a failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    pub method: SimMethod,
    pub result: Option<IntervalOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalOutcome {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalOutcome {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

impl Replication {
    pub fn get(&self, method: SimMethod) -> Option<&IntervalOutcome> {
        self.outcomes.iter().find(|o| o.method == method)?.result.as_ref()
    }
}

/// Runs every requested method on replication `r`.
pub fn replicate(spec: &ScenarioSpec, r: usize, nodes: &NodeSet) -> Replication {
    let dataset = generate_dataset(spec, r as u64);
    let wants = |m| spec.methods.contains(&m);
    let nn = nn_baseline::nn_input(&dataset, spec.continuity).ok();
    let mut outcomes = Vec::with_capacity(spec.methods.len());

    if wants(SimMethod::NDl) {
        let result = nn.as_ref().map(|input| {
            let dl = nn_baseline::dl_estimate(input);
            let (lower, upper) = dl.wald_interval(spec.level);
            IntervalOutcome {
                estimate: dl.theta,
                lower,
                upper,
            }
        });
        outcomes.push(MethodOutcome {
            method: SimMethod::NDl,
            result,
        });
    }
    if wants(SimMethod::NPlbc) {
        let result = nn
            .as_ref()
            .and_then(|input| nn_baseline::nn_plbc_interval(input, spec.level).ok())
            .filter(|i| i.usable())
            .map(|i| IntervalOutcome {
                estimate: i.estimate,
                lower: i.lower,
                upper: i.upper,
            });
        outcomes.push(MethodOutcome {
            method: SimMethod::NPlbc,
            result,
        });
    }
    if wants(SimMethod::GPl) || wants(SimMethod::GPlsbc) {
        let glmm = fit_mle(&dataset, nodes, &FitOptions::default())
            .ok()
            .filter(|f| f.converged)
            .and_then(|f| confidence_intervals(&dataset, nodes, &f, 0, spec.level).ok());
        let pick = |i: &crate::inference::IntervalResult| {
            i.usable().then_some(IntervalOutcome {
                estimate: i.estimate,
                lower: i.lower,
                upper: i.upper,
            })
        };
        if wants(SimMethod::GPl) {
            outcomes.push(MethodOutcome {
                method: SimMethod::GPl,
                result: glmm.as_ref().and_then(|(pl, _)| pick(pl)),
            });
        }
        if wants(SimMethod::GPlsbc) {
            outcomes.push(MethodOutcome {
                method: SimMethod::GPlsbc,
                result: glmm.as_ref().and_then(|(_, sbc)| pick(sbc)),
            });
        }
    }
    Replication { index: r, outcomes }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: SimMethod,
    /// Replications with a usable interval.
    pub used: usize,
    pub failures: usize,
    /// Usable intervals with an infinite bound.
    pub unbounded: usize,
    pub bias: Metric,
    pub coverage: Metric,
    /// Mean length over finite intervals.
    pub length: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub spec: ScenarioSpec,
    pub methods: Vec<MethodSummary>,
    pub replications: Vec<Replication>,
}

impl SimSummary {
    pub fn method(&self, method: SimMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn mean_and_se(values: &[f64]) -> Metric {
    let m = values.len();
    if m == 0 {
        return Metric {
            value: f64::NAN,
            mc_se: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let se = if m > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0) / m as f64).sqrt()
    } else {
        0.0
    };
    Metric { value: mean, mc_se: se }
}

/// Aggregates replications (in index order) into per-method metrics.
pub fn summarize(spec: &ScenarioSpec, replications: Vec<Replication>) -> SimSummary {
    let methods = spec
        .methods
        .iter()
        .map(|&method| {
            let ok: Vec<IntervalOutcome> = replications.iter().filter_map(|r| r.get(method).copied()).collect();
            let errors: Vec<f64> = ok.iter().map(|o| o.estimate - spec.theta0).collect();
            let covered: Vec<f64> = ok.iter().map(|o| f64::from(u8::from(o.covers(spec.theta0)))).collect();
            let lengths: Vec<f64> = ok.iter().map(IntervalOutcome::length).filter(|l| l.is_finite()).collect();
            let coverage = match covered.len() {
                0 => Metric {
                    value: f64::NAN,
                    mc_se: f64::NAN,
                },
                m => {
                    let p = covered.iter().sum::<f64>() / m as f64;
                    Metric {
                        value: p,
                        mc_se: (p * (1.0 - p) / m as f64).sqrt(),
                    }
                }
            };
            MethodSummary {
                method,
                used: ok.len(),
                failures: replications.len() - ok.len(),
                unbounded: ok.len() - lengths.len(),
                bias: mean_and_se(&errors),
                coverage,
                length: mean_and_se(&lengths),
            }
        })
        .collect();
    SimSummary {
        spec: spec.clone(),
        methods,
        replications,
    }
}

/// Runs a scenario, spreading replications over the current rayon pool.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<SimSummary> {
    run_scenario_with(spec, true)
}

pub fn run_scenario_with(spec: &ScenarioSpec, parallel: bool) -> Result<SimSummary> {
    spec.validate()?;
    let nodes = NodeSet::sobol(spec.nodes, spec.seed)?;
    let reps: Vec<Replication> = if parallel {
        (0..spec.replications)
            .into_par_iter()
            .map(|r| replicate(spec, r, &nodes))
            .collect()
    } else {
        (0..spec.replications).map(|r| replicate(spec, r, &nodes)).collect()
    };
    Ok(summarize(spec, reps))
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "family",
    "K",
    "tau2",
    "theta0",
    "replications",
    "B",
    "seed",
    "method",
    "metric",
    "value",
    "mc_se",
    "n_used",
    "failures",
];

/// One line of a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: FamilyKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau2: f64,
    pub theta0: f64,
    pub replications: usize,
    #[serde(rename = "B")]
    pub nodes: usize,
    pub seed: u64,
    pub method: SimMethod,
    pub metric: String,
    pub value: f64,
    pub mc_se: f64,
    pub n_used: usize,
    pub failures: usize,
}

pub fn result_rows(summaries: &[SimSummary]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for s in summaries {
        for m in &s.methods {
            for (metric, v) in [("bias", m.bias), ("coverage", m.coverage), ("length", m.length)] {
                rows.push(ResultRow {
                    family: s.spec.family,
                    k: s.spec.k,
                    tau2: s.spec.tau2,
                    theta0: s.spec.theta0,
                    replications: s.spec.replications,
                    nodes: s.spec.nodes,
                    seed: s.spec.seed,
                    method: m.method,
                    metric: metric.to_string(),
                    value: v.value,
                    mc_se: v.mc_se,
                    n_used: m.used,
                    failures: m.failures,
                });
            }
        }
    }
    rows
}

/// Writes the long-format result table: one row per scenario, method and
/// metric (bias, coverage, length).
pub fn write_results<W: Write>(summaries: &[SimSummary], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for row in result_rows(summaries) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(summaries: &[SimSummary], path: impl AsRef<Path>) -> Result<()> {
    write_results(summaries, std::fs::File::create(path)?)
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Design of the biased-estimator Wald experiment: study estimates carry a
/// small-sample bias `c_k / n_k` that does not shrink as `K` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedWaldDesign {
    pub ks: Vec<usize>,
    pub theta_star: f64,
    pub n_range: (u64, u64),
    /// Within-study variance is `unit_variance / n_k`.
    pub unit_variance: f64,
    /// Target non-centrality of the test statistic at the smallest `K`.
    pub noncentrality: f64,
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BiasedWaldDesign {
    fn default() -> Self {
        Self {
            ks: vec![5, 20, 80],
            theta_star: 0.3,
            n_range: (15, 150),
            unit_variance: 4.0,
            noncentrality: 2.0,
            replications: 2000,
            seed: 1,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasedWaldRow {
    pub k: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
    /// Non-centrality `sum w_k b_k / sqrt(sum w_k)` of the statistic.
    pub noncentrality: f64,
}

/// Empirical Type I error of the Wald test at the true `theta*` when each
/// study estimate is biased by `c_k / n_k`, with `(n_k, c_k)` drawn once and
/// frozen. `c_k` is scaled so the non-centrality at the smallest `K` equals
/// the design target. Weights use the true `tau^2 = 0`.
pub fn biased_wald_experiment(design: &BiasedWaldDesign) -> Result<Vec<BiasedWaldRow>> {
    let kmax = *design
        .ks
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("no K values".into()))?;
    let kmin = *design.ks.iter().min().expect("non-empty");
    if kmin < 2 {
        return Err(Error::InvalidArgument("K must be at least 2".into()));
    }
    let mut frozen = replication_rng(design.seed, u64::MAX);
    let (lo, hi) = design.n_range;
    let n: Vec<f64> = (0..kmax)
        .map(|_| frozen.random_range(lo as f64..hi as f64).floor())
        .collect();
    let raw_c: Vec<f64> = (0..kmax).map(|_| frozen.random_range(0.5..1.5)).collect();
    let sigma2: Vec<f64> = n.iter().map(|n| design.unit_variance / n).collect();
    let noncentrality = |k: usize, scale: f64| {
        let (mut num, mut sw) = (0.0, 0.0);
        for i in 0..k {
            let w = 1.0 / sigma2[i];
            num += w * scale * raw_c[i] / n[i];
            sw += w;
        }
        num / sw.sqrt()
    };
    let scale = design.noncentrality / noncentrality(kmin, 1.0);
    let bias: Vec<f64> = (0..kmax).map(|i| scale * raw_c[i] / n[i]).collect();
    let alpha = 1.0 - design.level;

    let rejections: Vec<Vec<bool>> = (0..design.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(design.seed, r as u64);
            let theta: Vec<f64> = (0..kmax)
                .map(|i| {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    design.theta_star + bias[i] + sigma2[i].sqrt() * z
                })
                .collect();
            design
                .ks
                .iter()
                .map(|&k| {
                    let input = NNInput::new(theta[..k].to_vec(), sigma2[..k].to_vec()).expect("valid input");
                    nn_baseline::wald_test_known(&input, 0.0, design.theta_star).p_value < alpha
                })
                .collect()
        })
        .collect();
    Ok(design
        .ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let m = design.replications as f64;
            let rate = rejections.iter().filter(|r| r[j]).count() as f64 / m;
            BiasedWaldRow {
                k,
                rejection_rate: rate,
                mc_se: (rate * (1.0 - rate) / m).sqrt(),
                noncentrality: noncentrality(k, scale),
            }
        })
        .collect())
}

/// Rejection probability of a two-sided level-`alpha` z-test whose
/// statistic is `N(delta, 1)`.
pub fn rejection_probability(delta: f64, alpha: f64) -> f64 {
    let z = norm_quantile(1.0 - alpha / 2.0);
    norm_cdf(-z + delta) + norm_cdf(-z - delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_schedule() {
        assert!((gamma_dispersion(1, 5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((gamma_dispersion(5, 5) - (1.0 + 16.0 / 5.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_mean_at_zero_tau() {
        let mut rng = replication_rng(7, 0);
        let mean = (0..10_000)
            .map(|_| generate_study(FamilyKind::Binomial, -2.0, 0.0, 1, 5, (15, 150), &mut rng).ybar)
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - logistic(-2.0)).abs() < 0.005, "{mean}");
    }

    #[test]
    fn poisson_mean_events() {
        let mut rng = replication_rng(3, 0);
        let mean = (0..10_000)
            .map(|_| generate_study(FamilyKind::Poisson, -2.0, 0.0, 1, 5, (100, 101), &mut rng).events())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 100.0 * (-2f64).exp()).abs() < 0.15, "{mean}");
    }

    #[test]
    fn sizes_are_in_range() {
        let mut rng = replication_rng(1, 9);
        for k in 1..=200 {
            let r = generate_study(FamilyKind::Gamma, 0.5, 1.0, k, 200, (15, 150), &mut rng);
            let n = r.weight();
            assert!((15.0..150.0).contains(&n));
            r.validate(FamilyKind::Gamma).unwrap();
        }
    }

    #[test]
    fn streams_are_independent_of_order() {
        let spec = ScenarioSpec::new(FamilyKind::Binomial, 5, 1.0, 3, 42);
        let a = generate_dataset(&spec, 2);
        let _ = generate_dataset(&spec, 0);
        let b = generate_dataset(&spec, 2);
        assert_eq!(a, b);
        assert_ne!(generate_dataset(&spec, 1), a);
    }

    #[test]
    fn scenario_parsing() {
        let text = r#"
[[scenario]]
family = "binomial"
K = 5
tau2 = 1.0
reps = 10
B = 256
seed = 4
methods = ["nDL", "gPLSBC"]
"#;
        let s = parse_scenarios(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].theta0, -2.0);
        assert_eq!(s[0].methods, vec![SimMethod::NDl, SimMethod::GPlsbc]);
        let bad = parse_scenarios(&text.replace("seed = 4", "sed = 4")).unwrap_err();
        assert!(bad.to_string().contains("sed"), "{bad}");
        assert!(parse_scenarios(&text.replace("reps = 10", "reps = 0")).is_err());
    }

    #[test]
    fn oracle_rejection_probability() {
        assert!((rejection_probability(0.0, 0.05) - 0.05).abs() < 1e-9);
        assert!(rejection_probability(2.0, 0.05) > 0.5);
    }
}
