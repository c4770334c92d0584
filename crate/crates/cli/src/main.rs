//! `hjb` — semi-Lagrangian solver for infinite-horizon discounted optimal
//! control, with convergence studies, a sequence-space oracle and feedback
//! rollouts.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 1).
    Input(String),
    /// The numerics failed: non-convergence, non-finite values, oracle gap
    /// (exit 2).
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<hjb_core::Error> for CliError {
    fn from(e: hjb_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(1),
            CliError::Numerical(_) => ExitCode::from(2),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hjb",
    about = "Semi-Lagrangian value iteration for discounted optimal control",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and the effective config.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for randomized sampling (validation estimates).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discrete value function and write it as CSV.
    Solve(CommonArgs),
    /// Run refinement and/or fixed-k convergence studies.
    Study(CommonArgs),
    /// Compare the solved value against the brute-force sequence minimum.
    Oracle(CommonArgs),
    /// Synthesize a greedy closed-loop trajectory and write it as CSV.
    Rollout(CommonArgs),
    /// Check problem assumptions on the mesh and print the report.
    Validate(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Study(a)
            | Command::Oracle(a)
            | Command::Rollout(a)
            | Command::Validate(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.common();
    let config = RunConfig::load(&args.config)?;
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(&config, &a.out),
        Command::Study(a) => commands::cmd_study(&config, &a.out),
        Command::Oracle(a) => commands::cmd_oracle(&config, &a.out),
        Command::Rollout(a) => commands::cmd_rollout(&config, &a.out),
        Command::Validate(a) => commands::cmd_validate(&config, &a.out, a.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.common();

    let result = match args.workers {
        Some(workers) if workers > 0 => {
            match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(|| run(&cli)),
                Err(e) => Err(CliError::Input(format!("cannot build thread pool: {e}"))),
            }
        }
        Some(_) => Err(CliError::Input("--workers must be at least 1".into())),
        None => run(&cli),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
