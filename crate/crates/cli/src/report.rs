use std::io::{self, Write};

use metaglmm::inference::IntervalResult;
use metaglmm::sim::SimSummary;
use metaglmm::{Dataset, ModelFit};

/// One printed interval.
#[derive(Debug, Clone)]
pub struct IntervalRow {
    pub term: String,
    pub method: String,
    pub level: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub bartlett_c: Option<f64>,
    pub flags: [String; 2],
}

impl IntervalRow {
    pub fn wald(term: &str, method: &str, level: f64, estimate: f64, se: f64, z: f64) -> Self {
        Self {
            term: term.to_string(),
            method: method.to_string(),
            level,
            estimate,
            lower: estimate - z * se,
            upper: estimate + z * se,
            bartlett_c: None,
            flags: ["Closed".into(), "Closed".into()],
        }
    }

    pub fn profile(term: &str, method: &str, r: &IntervalResult) -> Self {
        Self {
            term: term.to_string(),
            method: method.to_string(),
            level: r.level,
            estimate: r.estimate,
            lower: r.lower,
            upper: r.upper,
            bartlett_c: Some(r.bartlett_c),
            flags: r.flags.map(|f| f.to_string()),
        }
    }
}

fn width(names: impl Iterator<Item = usize>, min: usize) -> usize {
    names.max().unwrap_or(0).max(min)
}

pub fn fit_report(out: &mut impl Write, data: &Dataset, fit: &ModelFit, se: &[f64]) -> io::Result<()> {
    let w = width(data.covariate_names.iter().map(String::len), 11);
    writeln!(
        out,
        "{} family, {} link: {} records from {} studies; B = {}, seed {}",
        data.family.kind(),
        data.family.link(),
        data.len(),
        data.study_count(),
        fit.nodes_b,
        fit.seed
    )?;
    writeln!(out, "{:<w$} {:>9} {:>9}", "term", "estimate", "std.err")?;
    for ((name, b), s) in data.covariate_names.iter().zip(&fit.beta_hat).zip(se) {
        writeln!(out, "{name:<w$} {b:>9.3} {s:>9.3}")?;
    }
    let fixed = if fit.tau2_fixed { " (fixed)" } else { "" };
    writeln!(out, "{:<w$} {:>9.3}{fixed}", "tau2", fit.tau2_hat)?;
    writeln!(out, "log-likelihood {:.3}", fit.loglik)?;
    writeln!(
        out,
        "converged: {} ({} iterations, gradient norm {:.1e})",
        if fit.converged { "yes" } else { "no" },
        fit.iterations,
        fit.gradient_norm
    )
}

pub fn fit_csv(out: impl Write, data: &Dataset, fit: &ModelFit, se: &[f64]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "estimate", "std_error"])?;
    for ((name, b), s) in data.covariate_names.iter().zip(&fit.beta_hat).zip(se) {
        w.write_record([name.clone(), b.to_string(), s.to_string()])?;
    }
    w.write_record(["tau2".to_string(), fit.tau2_hat.to_string(), String::new()])?;
    w.write_record(["loglik".to_string(), fit.loglik.to_string(), String::new()])?;
    w.flush()?;
    Ok(())
}

pub fn interval_table(out: &mut impl Write, rows: &[IntervalRow]) -> io::Result<()> {
    let w = width(rows.iter().map(|r| r.term.len()), 11);
    writeln!(
        out,
        "{:<w$} {:<6} {:>9} {:>9} {:>9} {:>7}  flags",
        "coefficient", "method", "estimate", "lower", "upper", "C"
    )?;
    for r in rows {
        let c = r.bartlett_c.map_or_else(|| "-".to_string(), |c| format!("{c:.3}"));
        writeln!(
            out,
            "{:<w$} {:<6} {:>9.3} {:>9.3} {:>9.3} {:>7}  {}/{}",
            r.term, r.method, r.estimate, r.lower, r.upper, c, r.flags[0], r.flags[1]
        )?;
    }
    Ok(())
}

pub fn interval_csv(out: impl Write, rows: &[IntervalRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "coefficient",
        "method",
        "level",
        "estimate",
        "lower",
        "upper",
        "bartlett_c",
        "lower_flag",
        "upper_flag",
    ])?;
    for r in rows {
        w.write_record([
            r.term.clone(),
            r.method.clone(),
            r.level.to_string(),
            r.estimate.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.bartlett_c.map_or_else(String::new, |c| c.to_string()),
            r.flags[0].clone(),
            r.flags[1].clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulation_table(out: &mut impl Write, summaries: &[SimSummary]) -> io::Result<()> {
    writeln!(
        out,
        "{:<9} {:>3} {:>5} {:<7} {:>5} {:>8} {:>8} {:>8}",
        "family", "K", "tau2", "method", "used", "bias", "coverage", "length"
    )?;
    for s in summaries {
        for m in &s.methods {
            writeln!(
                out,
                "{:<9} {:>3} {:>5} {:<7} {:>5} {:>8.3} {:>8.3} {:>8.3}",
                s.spec.family.to_string(),
                s.spec.k,
                s.spec.tau2,
                m.method.to_string(),
                m.used,
                m.bias.value,
                m.coverage.value,
                m.length.value
            )?;
        }
    }
    Ok(())
}
