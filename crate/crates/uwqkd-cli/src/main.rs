//! `uwqkd`: underwater QKD link budgets from scenario files.
//!
//! Every subcommand reads one TOML scenario, optionally patched by
//! `--set section.key=value` flags, and writes one result table as CSV
//! (default) or JSON to stdout or `--out`. Exit codes are stable for
//! scripting: 0 success, 2 config error, 3 numeric non-convergence,
//! 4 bracket failure, 1 for other I/O problems.

use std::path::PathBuf;

use clap::{Args, Parser};

use uwqkd_cli::commands::{run_subcommand, Subcommand};
use uwqkd_cli::config::parse_config;
use uwqkd_cli::error::CliError;
use uwqkd_cli::table::Format;

#[derive(Parser)]
#[command(name = "uwqkd", version, about = "Underwater QKD link performance bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// QBER bound over a distance sweep.
    QberSweep(RunArgs),
    /// SKR bound over a distance sweep.
    SkrSweep(RunArgs),
    /// Decoy-state key rate over a distance sweep, with the ideal
    /// single-photon benchmark.
    DecoyRate(RunArgs),
    /// Achievable-distance solve for the configured protocol.
    Distance(RunArgs),
    /// Relay-count x distance grid with the optimal count marked.
    RelayScan(RunArgs),
    /// Monte Carlo photon transport; emits an arrival histogram.
    McRun(RunArgs),
    /// Receiver gate-time optimization from one transport batch.
    GateOpt(RunArgs),
    /// Closed-form versus numeric wave-structure-function table.
    ValidateWsf(RunArgs),
}

impl Command {
    fn split(self) -> (Subcommand, RunArgs) {
        match self {
            Command::QberSweep(a) => (Subcommand::QberSweep, a),
            Command::SkrSweep(a) => (Subcommand::SkrSweep, a),
            Command::DecoyRate(a) => (Subcommand::DecoyRate, a),
            Command::Distance(a) => (Subcommand::Distance, a),
            Command::RelayScan(a) => (Subcommand::RelayScan, a),
            Command::McRun(a) => (Subcommand::McRun, a),
            Command::GateOpt(a) => (Subcommand::GateOpt, a),
            Command::ValidateWsf(a) => (Subcommand::ValidateWsf, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Override a scenario key, e.g. --set geometry.distance=50.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Write the table to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Random seed override for the Monte Carlo subcommands.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; falls back to UWQKD_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let (cmd, args) = Cli::parse().command.split();
    match run(cmd, &args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("uwqkd: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cmd: Subcommand, args: &RunArgs) -> Result<(), CliError> {
    init_threads(args.threads)?;
    let scenario = parse_config(&args.config, &args.set)?;
    let table = run_subcommand(cmd, &scenario, args.seed)?;
    let text = table.render(args.format)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Sizes the rayon pool from `--threads` or `UWQKD_THREADS`. Results do
/// not depend on the pool size; this only controls parallelism.
fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("UWQKD_THREADS") {
            Ok(text) => Some(text.parse().map_err(|_| {
                CliError::Config(format!("UWQKD_THREADS: expected a thread count, got {text:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        // Ignore the error from configuring twice; the pool is already live.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
