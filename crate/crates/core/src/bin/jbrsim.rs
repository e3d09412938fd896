use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use jbr_core::analytics::{AnalyticParams, DEFAULT_TRIALS};
use jbr_core::harness::{
    evaluate_analytics, make_flows, run_detailed, run_sweep_detailed, summarize, write_analytics,
    write_records, write_summary, Formula, McSettings, MetricsRecord, Protocol, SweepSpec,
};
use jbr_core::simcore::{Mobility, SimStats};
use jbr_core::{ConfigError, DomainError, ScenarioConfig, SweepError};

#[derive(Parser)]
#[command(name = "jbrsim", version, about = "Janitor based routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation run, one CSV row.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "jbr")]
        protocol: Protocol,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every (protocol, nodes, pause, seed) combination.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 30.0, 60.0, 120.0, 300.0, 600.0, 900.0])]
        pause_times: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100])]
        nodes: Vec<usize>,
        /// Seeds as a comma list; `a-b` spans are expanded.
        #[arg(long, default_value = "1-10")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![Protocol::Flood, Protocol::Jbr])]
        protocols: Vec<Protocol>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-point mean and standard deviation here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Evaluate the closed-form model.
    Analytic {
        /// Formulas to evaluate; all when omitted.
        #[arg(long = "formula", value_name = "NAME")]
        formulas: Vec<Formula>,
        /// Model inputs as `key=value`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Add Monte Carlo check columns.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run with the full event trace.
    Trace {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "jbr")]
        protocol: Protocol,
        /// Where to write the trace; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one scenario key, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = split_kv(kv)?;
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("expected `key=value`, got `{0}`")]
    Override(String),
    #[error("bad seed list `{0}`")]
    Seeds(String),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) | CliError::Io { .. } | CliError::Csv(_) => 2,
            _ => 1,
        }
    }
}

fn split_kv(kv: &str) -> Result<(&str, &str), CliError> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Override(kv.to_string()))
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Seeds(text.to_string());
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| {
            CliError::Io {
                path: p.display().to_string(),
                source,
            }
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn check(record: &MetricsRecord, stats: &SimStats) -> Result<(), CliError> {
    if let Some(v) = stats.invariant_violations.first() {
        return Err(CliError::Invariant(format!(
            "{} seed {}: {} violation(s), first: {v}",
            record.protocol,
            record.seed,
            stats.invariant_violations.len()
        )));
    }
    if !(0.0..=1.0).contains(&record.delivery_ratio) {
        return Err(CliError::Invariant(format!(
            "delivery ratio {}",
            record.delivery_ratio
        )));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            protocol,
            out,
        } => {
            let config = scenario.load()?;
            let run = run_detailed(
                &config,
                protocol,
                Mobility::RandomWaypoint,
                make_flows(&config),
                false,
            )?;
            check(&run.record, &run.stats)?;
            write_records(&[run.record], output(out.as_deref())?)?;
        }
        Command::Sweep {
            scenario,
            pause_times,
            nodes,
            seeds,
            protocols,
            out,
            summary,
        } => {
            let base = scenario.load()?;
            let spec = SweepSpec {
                pause_times,
                node_counts: nodes,
                seeds: parse_seeds(&seeds)?,
                protocols,
            };
            let runs = run_sweep_detailed(&spec, &base)?;
            for r in &runs {
                check(&r.record, &r.stats)?;
            }
            let records: Vec<MetricsRecord> = runs.into_iter().map(|r| r.record).collect();
            write_records(&records, output(out.as_deref())?)?;
            if let Some(path) = summary {
                write_summary(&summarize(&records), output(Some(&path))?)?;
            }
        }
        Command::Analytic {
            formulas,
            params,
            mc,
            trials,
            seed,
            out,
        } => {
            let mut p = AnalyticParams::default();
            for kv in &params {
                let (k, v) = split_kv(kv)?;
                p.set(k, v)?;
            }
            let selected = if formulas.is_empty() {
                Formula::ALL.to_vec()
            } else {
                formulas
            };
            let rows =
                evaluate_analytics(&p, &selected, mc.then_some(McSettings { trials, seed }))?;
            write_analytics(output(out.as_deref())?, &rows)?;
        }
        Command::Trace {
            scenario,
            protocol,
            out,
        } => {
            let config = scenario.load()?;
            let run = run_detailed(
                &config,
                protocol,
                Mobility::RandomWaypoint,
                make_flows(&config),
                true,
            )?;
            let path = out.as_deref();
            let mut w = output(path)?;
            let io_err = |source| CliError::Io {
                path: path.map_or("stdout".into(), |p| p.display().to_string()),
                source,
            };
            for line in &run.trace {
                writeln!(w, "{line}").map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            check(&run.record, &run.stats)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jbrsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
