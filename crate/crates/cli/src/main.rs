//! `progeny-ldp`: rate functions, progeny laws, comparisons, simulation
//! and identity checks from the command line.
//!
//! Exit status: 0 success, 1 failed checks or other errors, 2 configuration
//! errors, 3 violated model hypotheses, 4 numerical convergence failures.

mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use progeny_ldp::offspring::DistSpec;
use progeny_ldp::ratefn::{RateKind, Route};

use config::{Command, Grid, ModelSpec, RateSelection, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(progeny_ldp::Error),
    Io(String),
}

impl From<progeny_ldp::Error> for CliError {
    fn from(e: progeny_ldp::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use progeny_ldp::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(E::Hypothesis(_)) => 3,
            CliError::Lib(E::Convergence(_)) => 4,
            CliError::Lib(
                E::ParameterDomain(_)
                | E::InvalidPmf(_)
                | E::TruncationInsufficient { .. }
                | E::Argument(_)
                | E::Scenario(_),
            ) => 2,
            CliError::Lib(E::CapExceeded { .. }) | CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("configuration error: {m}"),
            CliError::Lib(progeny_ldp::Error::Hypothesis(m)) => format!("hypothesis violated: {m}"),
            CliError::Lib(e) => e.to_string(),
            CliError::Io(m) => m.clone(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "progeny-ldp", version, about = "Large deviations of Galton-Watson total progeny")]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration (or a bare scenario for `simulate`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; tables go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation grid `lo:hi:points`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Grid>,
    /// Comma-separated verify checks.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Offspring law as JSON, e.g. '{"family":"bernoulli","params":{"p":0.5}}'.
    #[arg(long)]
    f: Option<String>,
    /// Initial-population law as JSON; one ancestor when absent.
    #[arg(long)]
    g: Option<String>,
    /// Rate function for `rate`.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<RateKind>,
    /// Evaluation route for `rate`: closed, direct or oracle.
    #[arg(long, value_parser = parse_route)]
    route: Option<Route>,
    /// Largest k tabulated by `progeny-pmf`.
    #[arg(long)]
    k_max: Option<usize>,
    /// Deviation for the random- versus deterministic-start tail comparison (`simulate`).
    #[arg(long)]
    tail_eps: Option<f64>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

fn parse_kind(s: &str) -> Result<RateKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        "expected one of offspring, initial, progeny, progeny-compound, estimator-ratio, \
         estimator-deterministic, estimator-meaninit"
            .into()
    })
}

fn parse_route(s: &str) -> Result<Route, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| "expected closed, direct or oracle".into())
}

fn parse_dist(flag: &str, s: &str) -> Result<DistSpec, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::Config(format!("--{flag}: column {}: {e}", e.column())))
}

/// Merges flags over the configuration file.
fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path, args.command)?,
        None => RunConfig::empty(args.command),
    };
    config.command = args.command;
    if args.f.is_some() || args.g.is_some() {
        let existing = config.model.take();
        let f = match &args.f {
            Some(s) => parse_dist("f", s)?,
            None => existing
                .as_ref()
                .map(|m| m.f.clone())
                .ok_or_else(|| CliError::Config("--g given without --f".into()))?,
        };
        let g = match &args.g {
            Some(s) => Some(parse_dist("g", s)?),
            None => existing.and_then(|m| m.g),
        };
        config.model = Some(ModelSpec { f, g });
    }
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.grid.is_some() {
        config.grid = args.grid;
    }
    if args.checks.is_some() {
        config.checks = args.checks.clone();
    }
    if let Some(kind) = args.kind {
        config.rate = Some(RateSelection { kind, route: args.route });
    } else if let Some(route) = args.route {
        let kind = config.rate.map_or(RateKind::Progeny, |r| r.kind);
        config.rate = Some(RateSelection { kind, route: Some(route) });
    }
    if args.k_max.is_some() {
        config.k_max = args.k_max;
    }
    if args.tail_eps.is_some() {
        config.tail_ratio_eps = args.tail_eps;
    }
    Ok(config)
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let config = resolve(args)?;
    if args.dump_config {
        print!("{}", config.to_json());
        return Ok(true);
    }
    let report = commands::run(&config)?;
    match &config.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            for out in &report.outputs {
                let path = dir.join(out.name);
                std::fs::write(&path, &out.body)
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            if matches!(config.command, Command::Extinction | Command::Verify) {
                for out in &report.outputs {
                    print!("{}", out.body);
                }
            }
        }
        None => {
            let many = report.outputs.len() > 1;
            for out in &report.outputs {
                if many {
                    println!("# {}", out.name);
                }
                print!("{}", out.body);
            }
        }
    }
    Ok(report.failures == 0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("progeny-ldp: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
