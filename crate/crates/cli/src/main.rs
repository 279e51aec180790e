//! `wgflow` command-line driver.
//!
//! Exit codes: 0 success, 1 oracle or audit mismatch, 2 configuration error,
//! 3 monotonicity abort, 4 I/O error.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "wgflow", version, about = "Pseudo-inverse solver for 1D attraction-repulsion gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write trajectory, energy reports and a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for the right-hand side; overrides the config.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Construct the steady state for linear repulsion.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare the grid solver with the particle oracle on random states.
    OracleCheck {
        /// Restrict the check to the profile, exponents and n of a config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Check the energy-dissipation balance of a finished run.
    EnergyAudit {
        /// Output directory of `simulate`, or an energy CSV.
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allowed defect relative to the energy drop.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, threads } => commands::simulate_cmd(config, out, *threads),
        Command::Steady { config, out } => commands::steady_cmd(config, out),
        Command::OracleCheck {
            config,
            out,
            seed,
            tolerance,
        } => commands::oracle_check_cmd(config.as_deref(), out.as_deref(), *seed, *tolerance),
        Command::EnergyAudit { dir, out, tolerance } => {
            commands::energy_audit_cmd(dir, out.as_deref(), *tolerance)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
