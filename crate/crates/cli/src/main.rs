//! Command-line runner for SISO state-space identification experiments:
//! trajectory simulation, single-shot identification, Monte Carlo method
//! comparison, and parameter-variance lower bounds.

mod commands;
mod config;
mod model_args;

use clap::{Parser, Subcommand};
use wnsf::{Error, Result};

use commands::{crlb, identify, montecarlo, simulate};

#[derive(Parser, Debug)]
#[command(
    name = "wnsf",
    version,
    about = "Identify SISO state-space models from output-only data and benchmark the estimators",
    after_help = "Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.\n\
                  WNSF_WORKERS caps the worker-thread count (0 or unset: one per CPU).\n\
                  Results are deterministic for a fixed config, independent of worker count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a trajectory to CSV (with a JSON metadata sidecar).
    Simulate(simulate::SimulateArgs),
    /// Fit one model to a trajectory and write a JSON report.
    Identify(identify::IdentifyArgs),
    /// Run a seeded trial grid; write per-trial CSV and a summary JSON.
    Montecarlo(montecarlo::MontecarloArgs),
    /// Evaluate the parameter-variance lower bound at given sample sizes.
    Crlb(crlb::CrlbArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // usage error under this binary's exit-code contract.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Identify(args) => identify::run(&args),
        Command::Montecarlo(args) => montecarlo::run(&args),
        Command::Crlb(args) => crlb::run(&args),
    }
}

/// 1 usage, 2 numerical, 3 I/O.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Io(_) | Error::Parse(_) => 3,
        _ => 2,
    }
}

/// Honor `WNSF_WORKERS` before any parallel region spins up the global pool.
fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("WNSF_WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidArgument(format!(
            "WNSF_WORKERS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    }
    Ok(())
}
