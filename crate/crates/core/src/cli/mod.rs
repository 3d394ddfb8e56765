//! Command-line front end. Every command is deterministic given `--seed`; the worker
//! count (`JUMPFOLIO_THREADS`) never changes the bytes written.

mod commands;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimation::Aggregation;
use crate::model::ParamsDocument;
use crate::optimizer::ReferenceWeights;
use crate::parallel;
use crate::simulation::ScenarioKind;

pub const DEFAULT_SEED: u64 = 42;
/// Smallest Monte Carlo size accepted for any simulated statistic.
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "jumpfolio", version, about = "Constant-mix portfolios under jump-diffusion: simulation, CVaR bounds, optimization, calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate price paths for the four jump scenarios.
    Simulate(SimulateArgs),
    /// Monte Carlo VaR/CLVaR of terminal wealth against the closed-form bounds over a p-grid.
    Bounds(BoundsArgs),
    /// Optimal constant-mix weights for a list of stop-loss rates.
    Optimize(OptimizeArgs),
    /// Calibrate Merton and GBM models to a price CSV and test their fit.
    Fit(FitArgs),
    /// Dump the bound constants as JSON.
    Constants(ConstantsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    #[value(name = "closed_form", alias = "closed-form")]
    ClosedForm,
    Bisection,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random draw.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Market parameters JSON.
    #[arg(long)]
    pub params: PathBuf,
    /// Scenario kind; all four when omitted.
    #[arg(long)]
    pub kind: Option<ScenarioKind>,
    /// Periods to cover (default: the document's horizon, else 1).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 252)]
    pub steps_per_period: usize,
    #[arg(long, default_value_t = 1)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 100.0)]
    pub initial_price: f64,
    /// Directory receiving one `scenario_<kind>.csv` per kind (required for several kinds).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Check that jump times follow the scenario taxonomy.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Parameters JSON with weights and endowments.
    #[arg(long)]
    pub params: PathBuf,
    /// Overrides the document's weights (comma list).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// `start:end:step` or a comma list of probabilities.
    #[arg(long, default_value = "0.01:0.25:0.01", conflicts_with = "p")]
    pub p_grid: String,
    /// Single probability (a one-row grid).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Parameters JSON with endowments (and optionally p, k_star or K, c0).
    #[arg(long)]
    pub params: PathBuf,
    /// Stop-loss rates k* (comma list, ascending).
    #[arg(long, value_delimiter = ',', conflicts_with = "floor")]
    pub k_star: Option<Vec<f64>>,
    /// Absolute wealth floor K instead of stop-loss rates.
    #[arg(long = "floor", alias = "K")]
    pub floor: Option<f64>,
    /// Tail probability (default: the document's p).
    #[arg(long)]
    pub p: Option<f64>,
    /// Cap on the portfolio drift.
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::ClosedForm)]
    pub mode: Mode,
    /// Emit closed-form and bisection solutions side by side.
    #[arg(long)]
    pub compare: bool,
    /// Jump-mgf reference exposures: optimum, unit, or a comma list.
    #[arg(long, default_value = "optimum")]
    pub reference: ReferenceWeights,
    /// Paths for the simulated terminal-wealth column (0 skips it).
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Price CSV with columns date,ticker,close.
    #[arg(long)]
    pub prices: PathBuf,
    /// Directory receiving fit_report.json and fitted_paths.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Return sampling: none (every observation) or monthly.
    #[arg(long, default_value = "none")]
    pub aggregate: Aggregation,
    /// Observations per rebalance period when not aggregating.
    #[arg(long, default_value_t = 21.0)]
    pub period_obs: f64,
    /// Risk-free rate per rebalance period.
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    /// Total jump intensity per rebalance period; estimated when absent.
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Common-jump intensity per rebalance period, overriding the synchronous-extremes split.
    #[arg(long)]
    pub lambda_common: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Parameters JSON with weights and endowments.
    #[arg(long)]
    pub params: PathBuf,
    /// Overrides the document's weights (comma list).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Tail probability (default: the document's p, else 0.05).
    #[arg(long)]
    pub p: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub(crate) fn read_params(path: &Path) -> Result<ParamsDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    ParamsDocument::from_json(&text).map_err(|e| match e {
        Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Runs `write` against `--out` or standard output.
pub(crate) fn with_output(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let io = |e: io::Error| Error::Input(format!("writing output: {e}"));
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush().map_err(io)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(io)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    parallel::with_thread_limit(parallel::threads_from_env(), move || match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Constants(a) => commands::constants(&a),
    })
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_exit() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
