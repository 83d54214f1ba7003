//! `congestion`: run, sweep and certify congestion scenarios from JSON files.
//!
//! Exit codes: 0 success, 1 certificate outside tolerance, 2 invalid input,
//! 3 infeasible instance, 4 no convergence.

mod certify;
mod commands;
mod error;
mod scenario;
mod solve;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Overrides;

#[derive(Parser)]
#[command(
    name = "congestion",
    version,
    about = "Wardrop equilibria and dynamic congestion scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Solver tolerance (Frank–Wolfe gap, or two-roads energy change).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap (Frank–Wolfe iterations, or two-roads sweeps).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Recorded in the manifest; the solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write CSVs, a certificate report and a manifest.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve every cell of the scenario's sweep grid.
    Sweep {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for independent cells.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Certify a flow or trajectory CSV against a scenario.
    Check {
        scenario: PathBuf,
        data: PathBuf,
        /// Residual tolerance, overriding the scenario's `check` block.
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for `check.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONGESTION_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            solver,
        } => commands::run(scenario, out, &solver.overrides()),
        Command::Sweep {
            scenario,
            out,
            jobs,
            solver,
        } => {
            let jobs =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            commands::sweep(scenario, out, jobs, &solver.overrides())
        }
        Command::Check {
            scenario,
            data,
            tol,
            out,
        } => commands::check(scenario, data, *tol, out.as_ref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
