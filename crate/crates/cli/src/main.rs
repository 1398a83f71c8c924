mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, RunConfig};
use error::CliError;

/// Additive isotonic regression: fits and Monte Carlo experiments.
#[derive(Parser)]
#[command(name = "addiso", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an additive isotonic model to a CSV (first column is the response).
    Fit(Common),
    /// Run one Monte Carlo experiment and report MISE per component.
    Simulate(Common),
    /// Reproduce a backfitting-vs-oracle comparison table.
    ReproduceTable(Common),
    /// Measure interior sup-distances between backfitting and oracle fits.
    OracleCheck(Common),
    /// Emit backfit/oracle/true curves at L2-distance quantiles.
    QuantileCurves(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.sim.master_seed = v;
        }
        if let Some(v) = self.reps {
            cfg.sim.reps = v;
        }
        if let Some(v) = self.tol {
            cfg.fit.tol = Some(v);
        }
        if let Some(v) = self.max_cycles {
            cfg.fit.max_cycles = v;
        }
        if let Some(v) = self.format {
            cfg.format = Some(v);
        }
        cfg.fit
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    type Handler = fn(&RunConfig) -> Result<commands::Outcome, CliError>;
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Fit(c) => (c, commands::cmd_fit),
        Command::Simulate(c) => (c, commands::cmd_simulate),
        Command::ReproduceTable(c) => (c, commands::cmd_reproduce_table),
        Command::OracleCheck(c) => (c, commands::cmd_oracle_check),
        Command::QuantileCurves(c) => (c, commands::cmd_quantile_curves),
    };
    let cfg = common.resolve()?;
    let out = cmd(&cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{}", out.text),
    }
    out.failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
