use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use metaglmm::fit::{beta_standard_errors, Objective};
use metaglmm::inference::IntervalResult;
use metaglmm::nn_baseline::{dl_regression, nn_interval};
use metaglmm::sim::{load_scenarios, run_scenario_with, write_results, SimSummary};
use metaglmm::{
    bundled, confidence_intervals, fit_mle, load_csv, nn_input, ContinuityPolicy, Dataset, Error, FamilySpec,
    FitOptions, Method, ModelFit, NodeSet, Schema,
};

use crate::report::{self, IntervalRow};
use crate::{CiArgs, DataArgs, FitArgs, MethodArg, QmcArgs, ReanalyzeArgs, SimulateArgs};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            error: error.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Evaluation { .. } | Error::ConstrainedFit { .. } => Failure::numeric(e),
            _ => Failure::input(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn schema(args: &DataArgs) -> Result<Schema, Failure> {
    let mut schema = Schema::default();
    for spec in &args.columns {
        let (role, name) = spec
            .split_once('=')
            .ok_or_else(|| Failure::input(anyhow!("--column expects ROLE=NAME, got `{spec}`")))?;
        let slot = match role.trim() {
            "study" => &mut schema.study,
            "arm" => &mut schema.arm,
            "n" => &mut schema.n,
            "events" => &mut schema.events,
            "person_time" => &mut schema.person_time,
            "mean" => &mut schema.mean,
            "sd" => &mut schema.sd,
            "estimate" => &mut schema.estimate,
            "variance" => &mut schema.variance,
            other => return Err(Failure::input(anyhow!("unknown schema role `{other}`"))),
        };
        *slot = name.trim().to_string();
    }
    schema.covariates = args.covariates.clone();
    Ok(schema)
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    let schema = schema(args)?;
    load_csv(&args.data, FamilySpec::of(args.family), &schema)
        .with_context(|| format!("reading {}", args.data.display()))
        .map_err(Failure::input)
}

fn nodes(qmc: &QmcArgs) -> Result<NodeSet, Failure> {
    Ok(NodeSet::sobol(qmc.qmc_nodes, qmc.seed)?)
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::input)
}

fn warn(fit: &ModelFit, verbose: u8) {
    if verbose > 0 {
        for w in &fit.warnings {
            eprintln!("warning: {w}");
        }
    }
}

pub fn fit(args: &FitArgs, verbose: u8) -> CmdResult {
    let data = load(&args.data)?;
    let nodes = nodes(&args.qmc)?;
    if let Some(t) = args.tau2_fixed {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Failure::input(anyhow!("--tau2-fixed must be a non-negative number, got {t}")));
        }
    }
    let options = FitOptions {
        tau2_fixed: args.tau2_fixed,
        ..FitOptions::default()
    };
    let fit = fit_mle(&data, &nodes, &options)?;
    warn(&fit, verbose);
    let objective = Objective::new(&data, &nodes)?;
    let se = beta_standard_errors(&objective, &fit);
    let mut out = io::stdout().lock();
    report::fit_report(&mut out, &data, &fit, &se).map_err(Failure::input)?;
    if let Some(path) = &args.out {
        report::fit_csv(create(path)?, &data, &fit, &se).map_err(Failure::input)?;
    }
    if fit.converged {
        Ok(())
    } else {
        Err(Failure::numeric(anyhow!("the optimizer did not converge")))
    }
}

/// Normal-normal coefficient labels, aligned with the GLMM terms they
/// estimate. Two-arm data reduce to contrasts, so the intercept of the
/// contrast model is the treatment coefficient.
fn nn_terms(data: &Dataset) -> Vec<String> {
    let names = &data.covariate_names;
    match (data.arm_pairs(), data.arm_column()) {
        (Some(_), Some(arm)) => {
            let mut terms = vec![names[arm].clone()];
            terms.extend(
                names
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 0 && *i != arm)
                    .map(|(_, n)| format!("{}:{n}", names[arm])),
            );
            terms
        }
        _ => names.clone(),
    }
}

fn nn_rows(data: &Dataset, level: f64, dl: bool, plbc: bool) -> Result<Vec<IntervalRow>, Failure> {
    let input = nn_input(data, ContinuityPolicy::ZeroOnly)?;
    let terms = nn_terms(data);
    let mut rows = Vec::new();
    if dl {
        let reg = dl_regression(&input.theta_hat, &input.sigma2, &input.design())
            .ok_or_else(|| Failure::input(anyhow!("the normal-normal design is rank deficient")))?;
        let z = metaglmm::special::norm_quantile(0.5 + 0.5 * level);
        for (i, term) in terms.iter().enumerate() {
            rows.push(IntervalRow::wald(term, "DL", level, reg.beta[i], reg.se[i], z));
        }
    }
    if plbc {
        for (i, term) in terms.iter().enumerate() {
            let r = nn_interval(&input, i, level, Method::Plsbc)?;
            rows.push(IntervalRow::profile(term, "PLBC", &r));
        }
    }
    Ok(rows)
}

fn glmm_rows(
    data: &Dataset,
    nodes: &NodeSet,
    fit: &ModelFit,
    level: f64,
    pl: bool,
    plsbc: bool,
    verbose: u8,
) -> Result<Vec<IntervalRow>, Failure> {
    let mut rows = Vec::new();
    for (i, term) in data.covariate_names.iter().enumerate() {
        let (a, b): (IntervalResult, IntervalResult) = confidence_intervals(data, nodes, fit, i, level)?;
        if verbose > 1 {
            eprintln!("{term}: {} profile evaluations", b.trace.len());
        }
        if pl {
            rows.push(IntervalRow::profile(term, "PL", &a));
        }
        if plsbc {
            rows.push(IntervalRow::profile(term, "PLSBC", &b));
        }
    }
    Ok(rows)
}

/// Puts rows for the same term together, GLMM term order first.
fn group_rows(data: &Dataset, rows: Vec<IntervalRow>) -> Vec<IntervalRow> {
    let mut order: Vec<String> = data.covariate_names.clone();
    for r in &rows {
        if !order.contains(&r.term) {
            order.push(r.term.clone());
        }
    }
    let method_rank = |m: &str| ["DL", "PLBC", "PL", "PLSBC"].iter().position(|x| *x == m).unwrap_or(4);
    let mut rows = rows;
    rows.sort_by_key(|r| (order.iter().position(|t| *t == r.term), method_rank(&r.method)));
    rows
}

pub fn ci(args: &CiArgs, verbose: u8) -> CmdResult {
    let data = load(&args.data)?;
    let nodes = nodes(&args.qmc)?;
    let has = |m: MethodArg| args.method.contains(&m);
    let all = has(MethodArg::All);
    let want_pl = all || has(MethodArg::Pl);
    let want_plsbc = all || has(MethodArg::Plsbc);
    let want_dl = has(MethodArg::Dl) || (all && args.nn);
    let want_plbc = has(MethodArg::Plbc) || (all && args.nn);
    let level = args.qmc.level;

    let mut rows = nn_rows(&data, level, want_dl, want_plbc)?;
    if want_pl || want_plsbc {
        let fit = fit_mle(&data, &nodes, &FitOptions::default())?;
        warn(&fit, verbose);
        if !fit.converged {
            return Err(Failure::numeric(anyhow!("the optimizer did not converge; no profile intervals")));
        }
        rows.extend(glmm_rows(&data, &nodes, &fit, level, want_pl, want_plsbc, verbose)?);
    }
    let rows = group_rows(&data, rows);
    report::interval_table(&mut io::stdout().lock(), &rows).map_err(Failure::input)?;
    if let Some(path) = &args.out {
        report::interval_csv(create(path)?, &rows).map_err(Failure::input)?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, verbose: u8) -> CmdResult {
    let mut specs = load_scenarios(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))
        .map_err(Failure::input)?;
    for s in &mut specs {
        if let Some(r) = args.reps {
            if r == 0 {
                return Err(Failure::input(anyhow!("--reps must be at least 1")));
            }
            s.replications = r;
        }
        if let Some(seed) = args.seed {
            s.seed = seed;
        }
    }
    let parallel = match args.threads {
        Some(0) => return Err(Failure::input(anyhow!("--threads must be at least 1"))),
        Some(1) => false,
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(Failure::input)?;
            true
        }
        None => true,
    };
    let mut summaries: Vec<SimSummary> = Vec::with_capacity(specs.len());
    for spec in &specs {
        let start = std::time::Instant::now();
        let summary = run_scenario_with(spec, parallel)?;
        if verbose > 0 {
            eprintln!(
                "{} K={} tau2={}: {} replications in {:.1}s",
                spec.family,
                spec.k,
                spec.tau2,
                spec.replications,
                start.elapsed().as_secs_f64()
            );
        }
        summaries.push(summary);
    }
    match &args.out {
        Some(path) => {
            write_results(&summaries, create(path)?)?;
            report::simulation_table(&mut io::stdout().lock(), &summaries).map_err(Failure::input)?;
        }
        None => write_results(&summaries, io::stdout().lock())?,
    }
    Ok(())
}

pub fn reanalyze(args: &ReanalyzeArgs, verbose: u8) -> CmdResult {
    let data = bundled::by_id(&args.id).ok_or_else(|| {
        Failure::input(anyhow!(
            "unknown dataset `{}`; bundled datasets: {}",
            args.id,
            bundled::IDS.join(", ")
        ))
    })?;
    let nodes = nodes(&args.qmc)?;
    let level = args.qmc.level;
    let target = nn_terms(&data).swap_remove(0);
    let index = data
        .covariate_names
        .iter()
        .position(|n| *n == target)
        .ok_or_else(|| Failure::input(anyhow!("no coefficient `{target}` in the GLMM")))?;

    let mut rows: Vec<IntervalRow> = nn_rows(&data, level, true, true)?
        .into_iter()
        .filter(|r| r.term == target)
        .collect();
    let fit = fit_mle(&data, &nodes, &FitOptions::default())?;
    warn(&fit, verbose);
    if !fit.converged {
        return Err(Failure::numeric(anyhow!("the optimizer did not converge; no profile intervals")));
    }
    let (pl, plsbc) = confidence_intervals(&data, &nodes, &fit, index, level)?;
    rows.push(IntervalRow::profile(&target, "PL", &pl));
    rows.push(IntervalRow::profile(&target, "PLSBC", &plsbc));

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{}: {} studies, {} family, coefficient `{target}`, B = {}, seed {}, tau2 = {:.3}",
        args.id,
        data.study_count(),
        data.family.kind(),
        nodes.len(),
        nodes.seed(),
        fit.tau2_hat
    )
    .map_err(Failure::input)?;
    report::interval_table(&mut out, &rows).map_err(Failure::input)?;
    if let Some(path) = &args.out {
        report::interval_csv(create(path)?, &rows).map_err(Failure::input)?;
    }
    Ok(())
}
