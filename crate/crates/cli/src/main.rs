use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "acoi", version, about = "Vanishing-discount analysis of average-cost MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discounted optimality equation at every schedule point.
    Solve(Args),
    /// Run the discount schedule and certify the average-cost inequality.
    Vanish(Args),
    /// Check the model conditions against a prior `vanish` run.
    Check(Args),
    /// Monte Carlo hitting times, pathwise bounds and drift checks.
    Simulate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tol) = args.tol {
        cfg.tolerances.solver = tol;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => commands::cmd_solve(&load(&a)?),
        Command::Vanish(a) => commands::cmd_vanish(&load(&a)?),
        Command::Check(a) => commands::cmd_check(&load(&a)?),
        Command::Simulate(a) => commands::cmd_simulate(&load(&a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
