//! `xsdr` command-line driver.

mod commands;
mod data;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xsdr::SdrError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("estimator error: {0}")]
    Estimator(SdrError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Estimator(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

impl From<SdrError> for CliError {
    fn from(e: SdrError) -> Self {
        match e {
            SdrError::InvalidOptions(_)
            | SdrError::InvalidP(_)
            | SdrError::TauOutOfRange(_)
            | SdrError::TooManySlices { .. } => CliError::Config(e.to_string()),
            other => CliError::Estimator(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "xsdr", version, about = "Expectile-assisted sufficient dimension reduction")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Estimator settings shared by the data-driven subcommands.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// sir, save, dr, with an optional ea- (projective) or mea- (pooled) prefix.
    #[arg(long, default_value = "ea-dr")]
    pub method: String,
    /// Number of slices.
    #[arg(long = "H", default_value_t = xsdr::inverse::DEFAULT_SLICES)]
    pub slices: usize,
    /// Number of random projections.
    #[arg(long = "N", default_value_t = xsdr::inverse::DEFAULT_PROJECTIONS)]
    pub projections: usize,
    /// Number of expectile levels, spaced at l/(k+1).
    #[arg(long, default_value_t = xsdr::inverse::DEFAULT_LEVELS)]
    pub k: usize,
    /// Explicit expectile levels; overrides --k.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Ridge weight, or "auto" for distance-correlation selection.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Candidate grid for --lambda auto.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Fixed RBF scale; defaults to the inverse squared mean pairwise distance.
    #[arg(long)]
    pub r: Option<f64>,
    /// Multiplier applied to the default RBF scale.
    #[arg(long, conflicts_with = "r")]
    pub r_mult: Option<f64>,
    /// Number of directions.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, env = "XSDR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Headed CSV file.
    pub csv: PathBuf,
    /// Response column name or 0-based index.
    #[arg(long)]
    pub response: String,
    /// Predictor columns (default: all others).
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
    /// Output directory.
    #[arg(long, short, default_value = "xsdr-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a central-subspace basis.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Monte-Carlo accuracy tables on the benchmark models.
    Simulate(commands::SimulateArgs),
    /// Sequential permutation test for the structural dimension.
    Order {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, default_value_t = xsdr::order::DEFAULT_ALPHA)]
        alpha: f64,
        /// Permutations per step.
        #[arg(long = "B", default_value_t = xsdr::order::DEFAULT_PERMUTATIONS)]
        permutations: usize,
        /// Refit the expectiles on every permuted sample.
        #[arg(long)]
        refit: bool,
    },
    /// Leave-one-out average asymmetric loss of expectile curves on the
    /// reduced predictors.
    Loocv {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
        taus: Vec<f64>,
        /// Ridge weight of the curve fits.
        #[arg(long, default_value_t = xsdr::benchmark::DEFAULT_CURVE_LAMBDA)]
        curve_lambda: f64,
    },
    /// Expectile curves along the first estimated direction.
    PlotExpectiles {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
        taus: Vec<f64>,
        #[arg(long, default_value_t = xsdr::benchmark::DEFAULT_CURVE_LAMBDA)]
        curve_lambda: f64,
        /// Also render curves.svg.
        #[arg(long)]
        svg: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Fit { input, est } => commands::fit(&input, &est),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Order {
            input,
            est,
            alpha,
            permutations,
            refit,
        } => commands::order(&input, &est, alpha, permutations, refit),
        Command::Loocv {
            input,
            est,
            taus,
            curve_lambda,
        } => commands::loocv(&input, &est, &taus, curve_lambda),
        Command::PlotExpectiles {
            input,
            est,
            taus,
            curve_lambda,
            svg,
        } => commands::plot_expectiles(&input, &est, &taus, curve_lambda, svg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xsdr: {e}");
            ExitCode::from(e.code())
        }
    }
}
