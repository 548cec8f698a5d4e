//! Command-line front end: batch analyses of flow-kick disturbance systems
//! with CSV/JSON/SVG artifacts.

mod cmd;
mod config;
mod emit;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowkick_core::FkError;

#[derive(Parser)]
#[command(
    name = "flowkick",
    version,
    about = "Flow-kick disturbance analysis: orbits, fixed points, branches, bifurcation curves, stability grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List built-in models, or print one entry with equations and
    /// reference values
    Models(cmd::models::ModelsArgs),
    /// Iterate flow-kick orbits and emit time series
    Simulate(cmd::simulate::SimulateArgs),
    /// Fixed points at one (tau, lambda) from multi-start Newton
    Equilibria(cmd::equilibria::EquilibriaArgs),
    /// Continue a fixed-point branch over tau or lambda
    Branch(cmd::branch::BranchArgs),
    /// Continue a saddle-node / Neimark-Sacker / transcritical curve in
    /// (tau, lambda) space
    Bifcurve(cmd::bifcurve::BifcurveArgs),
    /// Classify a (tau, lambda-or-kappa) grid by fixed-point count and
    /// stability
    Grid(cmd::grid::GridArgs),
}

/// Arguments shared by every analysis command.
#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Built-in model name (see `flowkick models`)
    #[arg(long, conflicts_with = "system")]
    pub model: Option<String>,
    /// System definition file (see README for the format)
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Mortality parameter for the vegetation model
    #[arg(long)]
    pub m: Option<f64>,
    /// Integration tolerance (absolute and relative)
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated output formats: csv, json, svg
    #[arg(long, default_value = "csv,json,svg")]
    pub format: String,
    /// Worker threads for grid scans (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Random seed for multi-start sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub enum CliError {
    Usage(String),
    Numeric(FkError),
    Io(std::io::Error),
}

impl From<FkError> for CliError {
    fn from(e: FkError) -> Self {
        CliError::Numeric(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let result = match &cli.command {
        Command::Models(args) => cmd::models::run(args),
        Command::Simulate(args) => with_threads(&args.common, || cmd::simulate::run(args)),
        Command::Equilibria(args) => with_threads(&args.common, || cmd::equilibria::run(args)),
        Command::Branch(args) => with_threads(&args.common, || cmd::branch::run(args)),
        Command::Bifcurve(args) => with_threads(&args.common, || cmd::bifcurve::run(args)),
        Command::Grid(args) => with_threads(&args.common, || cmd::grid::run(args)),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(e)) => match e {
            FkError::Invalid(_) | FkError::Parse { .. } => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            other => {
                eprintln!("numeric failure: {other}");
                ExitCode::from(3)
            }
        },
        Err(CliError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(3)
        }
    }
}

fn with_threads<F: FnOnce() -> Result<(), CliError>>(
    common: &CommonArgs,
    f: F,
) -> Result<(), CliError> {
    if common.threads > 0 {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
    f()
}
