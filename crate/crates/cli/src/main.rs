//! `metaglmm` command-line front end.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metaglmm::FamilyKind;

#[derive(Debug, Parser)]
#[command(name = "metaglmm", version, about = "Random-effects meta-analysis of aggregate data under GLMMs")]
struct Cli {
    /// Print warnings and search diagnostics.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the random-intercept GLMM by maximum likelihood.
    Fit(FitArgs),
    /// Profile-likelihood confidence intervals, with normal-normal comparators.
    Ci(CiArgs),
    /// Run simulation scenarios from a TOML file and write long-format CSV.
    Simulate(SimulateArgs),
    /// Reanalyze a bundled dataset with every method.
    Reanalyze(ReanalyzeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Outcome family.
    #[arg(long)]
    pub family: FamilyKind,

    /// Input CSV, one row per study arm.
    #[arg(long)]
    pub data: PathBuf,

    /// Rename a schema column, e.g. `--column n=size`. Roles: study, arm, n,
    /// events, person_time, mean, sd, estimate, variance.
    #[arg(long = "column", value_name = "ROLE=NAME")]
    pub columns: Vec<String>,

    /// Covariate columns (default: every unclaimed column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct QmcArgs {
    /// Confidence level.
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub level: f64,

    /// Number of quasi-Monte Carlo nodes B.
    #[arg(long = "qmc-nodes", value_name = "B", default_value_t = 2048, value_parser = parse_nodes)]
    pub qmc_nodes: usize,

    /// Node scrambling seed; 0 gives the unscrambled set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub qmc: QmcArgs,

    /// Hold tau^2 at this value (0 gives the fixed-effects GLM).
    #[arg(long = "tau2-fixed", value_name = "VALUE")]
    pub tau2_fixed: Option<f64>,

    /// Write estimates as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dl,
    Plbc,
    Pl,
    Plsbc,
    All,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub qmc: QmcArgs,

    /// Interval methods. `all` means PL and PLSBC, plus DL and PLBC with `--nn`.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub method: Vec<MethodArg>,

    /// Add the normal-normal comparators (DL, PLBC).
    #[arg(long)]
    pub nn: bool,

    /// Write intervals as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file with `[[scenario]]` tables.
    #[arg(long)]
    pub scenario: PathBuf,

    /// Override the replication count of every scenario.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Override the seed of every scenario.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads for replications.
    #[arg(long, env = "METAGLMM_THREADS")]
    pub threads: Option<usize>,

    /// Write results CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReanalyzeArgs {
    /// Bundled dataset id.
    pub id: String,

    #[command(flatten)]
    pub qmc: QmcArgs,

    /// Write the comparison table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.5 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("level must lie in (0.5, 1), got {v}"))
    }
}

fn parse_nodes(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 64 {
        Ok(v)
    } else {
        Err(format!("at least 64 nodes are required, got {v}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, cli.verbose),
        Command::Ci(a) => commands::ci(a, cli.verbose),
        Command::Simulate(a) => commands::simulate(a, cli.verbose),
        Command::Reanalyze(a) => commands::reanalyze(a, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
