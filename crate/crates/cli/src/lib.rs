//! Command-line driver for the equilibrium solver: configuration, result
//! files and the regime-map figure.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{ExitCode, Failure, Options};

#[derive(Debug, Parser)]
#[command(
    name = "pbe",
    version,
    about = "Equilibria of the misbehavior-inspection game on priority lanes"
)]
pub struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Seed for random draws and simulation; overrides `verify.seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Suppress standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve for the equilibrium; writes equilibrium.json.
    Solve,
    /// Classify the parameters into a regime; writes classification.json.
    Classify,
    /// Sweep the configured axes; writes sweep.csv and sweep.json.
    Sweep,
    /// Sweep p_t_l × p_d and draw the regimes; writes sweep.csv and regime_map.svg.
    RegimeMap,
    /// Cross-check the solver against independent oracles; writes verify.json.
    Verify,
    /// Simulate the configured M/M/1 queue; writes queue.json.
    SimulateQueue,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let Some(config) = cli.config.clone() else {
        eprintln!("error: --config <PATH> is required");
        return ExitCode::Config as i32;
    };
    let opts = Options {
        config,
        out: cli.out.clone(),
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Solve => commands::solve(&opts),
        Command::Classify => commands::classify(&opts),
        Command::Sweep => commands::sweep(&opts),
        Command::RegimeMap => commands::regime_map(&opts),
        Command::Verify => commands::verify(&opts),
        Command::SimulateQueue => commands::simulate_queue(&opts),
    };
    match result {
        Ok(code) => code as i32,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code as i32
        }
    }
}
