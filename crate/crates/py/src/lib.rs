//! Python bindings for `metaglmm`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use metaglmm::inference::IntervalResult;
use metaglmm::nn_baseline::{dl_estimate as core_dl, nn_plbc_interval};
use metaglmm::sim::{parse_scenarios, run_scenario_with, write_results};
use metaglmm::{
    bundled, confidence_intervals as core_cis, fit_mle, load_csv, nn_input, ContinuityPolicy, Error, FamilyKind,
    FamilySpec, FitOptions, NodeSet, Schema,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Evaluation { .. } | Error::ConstrainedFit { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<FamilyKind> {
    name.parse().map_err(to_py)
}

/// Aggregate study data for one outcome family.
#[pyclass(module = "pymetaglmm", frozen)]
pub struct Dataset {
    inner: metaglmm::Dataset,
}

#[pymethods]
impl Dataset {
    /// Reads a CSV file. `covariates` restricts the covariate columns.
    #[staticmethod]
    #[pyo3(signature = (path, family, covariates=None))]
    fn from_csv(path: &str, family: &str, covariates: Option<Vec<String>>) -> PyResult<Self> {
        let schema = Schema {
            covariates,
            ..Schema::default()
        };
        let inner = load_csv(path, FamilySpec::of(self::family(family)?), &schema).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// A dataset shipped with the library, e.g. `"long2020"`.
    #[staticmethod]
    fn bundled(id: &str) -> PyResult<Self> {
        bundled::by_id(id)
            .map(|inner| Self { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown dataset `{id}`; bundled: {}", bundled::IDS.join(", "))))
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.kind().to_string()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names.clone()
    }

    #[getter]
    fn n_studies(&self) -> usize {
        self.inner.study_count()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(family={}, records={}, studies={}, covariates={:?})",
            self.inner.family.kind(),
            self.inner.len(),
            self.inner.study_count(),
            self.inner.covariate_names
        )
    }
}

/// Maximum-likelihood fit of the random-intercept GLMM.
#[pyclass(module = "pymetaglmm", frozen, get_all)]
pub struct Fit {
    beta: Vec<f64>,
    tau2: f64,
    loglik: f64,
    converged: bool,
    iterations: usize,
    qmc_nodes: usize,
    seed: u64,
    covariate_names: Vec<String>,
}

#[pymethods]
impl Fit {
    fn __repr__(&self) -> String {
        format!(
            "Fit(beta={:?}, tau2={:.6}, loglik={:.6}, converged={})",
            self.beta, self.tau2, self.loglik, self.converged
        )
    }
}

/// A confidence interval with its search diagnostics.
#[pyclass(module = "pymetaglmm", frozen, get_all)]
pub struct Interval {
    method: String,
    estimate: f64,
    lower: f64,
    upper: f64,
    level: f64,
    bartlett_c: Option<f64>,
    flags: (String, String),
}

impl Interval {
    fn profile(method: &str, r: &IntervalResult) -> Self {
        Self {
            method: method.to_string(),
            estimate: r.estimate,
            lower: r.lower,
            upper: r.upper,
            level: r.level,
            bartlett_c: Some(r.bartlett_c),
            flags: (r.flags[0].to_string(), r.flags[1].to_string()),
        }
    }
}

#[pymethods]
impl Interval {
    fn __repr__(&self) -> String {
        format!(
            "Interval({}: {:.3} [{:.3}, {:.3}])",
            self.method, self.estimate, self.lower, self.upper
        )
    }
}

fn nodes(count: usize, seed: u64) -> PyResult<NodeSet> {
    if count < 64 {
        return Err(PyValueError::new_err(format!("at least 64 nodes are required, got {count}")));
    }
    NodeSet::sobol(count, seed).map_err(to_py)
}

/// Fits the GLMM. `tau2_fixed=0.0` gives the fixed-effects GLM.
#[pyfunction]
#[pyo3(signature = (data, qmc_nodes=2048, seed=0, tau2_fixed=None))]
fn fit(py: Python<'_>, data: &Dataset, qmc_nodes: usize, seed: u64, tau2_fixed: Option<f64>) -> PyResult<Fit> {
    let nodes = nodes(qmc_nodes, seed)?;
    let options = FitOptions {
        tau2_fixed,
        ..FitOptions::default()
    };
    let f = py
        .detach(|| fit_mle(&data.inner, &nodes, &options))
        .map_err(to_py)?;
    Ok(Fit {
        beta: f.beta_hat,
        tau2: f.tau2_hat,
        loglik: f.loglik,
        converged: f.converged,
        iterations: f.iterations,
        qmc_nodes,
        seed,
        covariate_names: data.inner.covariate_names.clone(),
    })
}

/// PL and PLSBC intervals for one coefficient (index or name), using the
/// nodes the fit was computed with.
#[pyfunction]
#[pyo3(signature = (data, fit, coefficient, level=0.95))]
fn confidence_intervals(
    py: Python<'_>,
    data: &Dataset,
    fit: &Fit,
    coefficient: &Bound<'_, PyAny>,
    level: f64,
) -> PyResult<(Interval, Interval)> {
    let names = &data.inner.covariate_names;
    let index = if let Ok(i) = coefficient.extract::<usize>() {
        i
    } else {
        let name: String = coefficient.extract()?;
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| PyValueError::new_err(format!("no coefficient `{name}`; have {names:?}")))?
    };
    let nodes = nodes(fit.qmc_nodes, fit.seed)?;
    let model = metaglmm::ModelFit {
        beta_hat: fit.beta.clone(),
        tau2_hat: fit.tau2,
        loglik: fit.loglik,
        converged: fit.converged,
        iterations: fit.iterations,
        gradient_norm: 0.0,
        nodes_b: fit.qmc_nodes,
        seed: fit.seed,
        tau2_fixed: false,
        warnings: Vec::new(),
    };
    let (pl, sbc) = py
        .detach(|| core_cis(&data.inner, &nodes, &model, index, level))
        .map_err(to_py)?;
    Ok((Interval::profile("PL", &pl), Interval::profile("PLSBC", &sbc)))
}

/// DerSimonian-Laird estimate with its Wald interval.
#[pyfunction]
#[pyo3(signature = (data, level=0.95))]
fn dl(data: &Dataset, level: f64) -> PyResult<Interval> {
    let input = nn_input(&data.inner, ContinuityPolicy::ZeroOnly).map_err(to_py)?;
    let est = core_dl(&input);
    let (lower, upper) = est.wald_interval(level);
    Ok(Interval {
        method: "DL".into(),
        estimate: est.theta,
        lower,
        upper,
        level,
        bartlett_c: None,
        flags: ("Closed".into(), "Closed".into()),
    })
}

/// Bartlett-corrected normal-normal profile-likelihood interval.
#[pyfunction]
#[pyo3(signature = (data, level=0.95))]
fn plbc(data: &Dataset, level: f64) -> PyResult<Interval> {
    let input = nn_input(&data.inner, ContinuityPolicy::ZeroOnly).map_err(to_py)?;
    let r = nn_plbc_interval(&input, level).map_err(to_py)?;
    Ok(Interval::profile("PLBC", &r))
}

/// Bartlett factor `C` for within-study variances at heterogeneity `tau2`.
#[pyfunction]
fn bartlett_c(sigma2: Vec<f64>, tau2: f64) -> PyResult<f64> {
    metaglmm::bartlett_c(&sigma2, tau2).map_err(to_py)
}

/// Runs `[[scenario]]` tables from TOML text and returns the results CSV.
#[pyfunction]
#[pyo3(signature = (scenarios, reps=None, parallel=true))]
fn simulate(py: Python<'_>, scenarios: &str, reps: Option<usize>, parallel: bool) -> PyResult<String> {
    let mut specs = parse_scenarios(scenarios).map_err(to_py)?;
    if let Some(r) = reps {
        for s in &mut specs {
            s.replications = r;
        }
    }
    py.detach(|| {
        let summaries = specs
            .iter()
            .map(|s| run_scenario_with(s, parallel))
            .collect::<metaglmm::Result<Vec<_>>>()?;
        let mut buf = Vec::new();
        write_results(&summaries, &mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
    })
    .map_err(to_py)
}

/// Exact conditional bias of the continuity-corrected log odds ratio.
/// Returns `(bias, conditional, excluded)`.
#[pyfunction]
fn log_or_bias_oracle(n0: u32, n1: u32, mu: f64, theta: f64, a: f64) -> PyResult<(f64, bool, f64)> {
    let b = metaglmm::log_or_bias_oracle(n0, n1, mu, theta, a).map_err(to_py)?;
    Ok((b.bias, b.conditional, b.excluded))
}

#[pymodule]
fn pymetaglmm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Fit>()?;
    m.add_class::<Interval>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(dl, m)?)?;
    m.add_function(wrap_pyfunction!(plbc, m)?)?;
    m.add_function(wrap_pyfunction!(bartlett_c, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(log_or_bias_oracle, m)?)?;
    Ok(())
}
