//! `mbqr`: model-based quantile regression for counts from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod data;
mod error;
mod format;

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mbqr",
    version,
    about = "Model-based quantile regression for count data"
)]
struct Cli {
    /// Worker threads for replicate fan-out (default: logical processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a count distribution or the quantile-to-parameter map.
    Dist(DistArgs),
    /// Fit a quantile regression to a CSV file.
    Fit(FitArgs),
    /// Quantile-crossing frequency of model-based vs jittered fits.
    CrossingExperiment(ExperimentArgs),
    /// Per-area relative risk and exceedance probabilities.
    RiskMap(RiskArgs),
    /// Run a numerical verification suite.
    Verify(VerifyArgs),
    /// Write synthetic datasets.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poisson,
    Binomial,
    Negbin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExposureArg {
    None,
    QuantileLevel,
    ParameterLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma1,
    Lemma2,
    Theorem1,
}

/// Family flags; which ones are needed depends on the family.
#[derive(Debug, Clone, Args)]
pub struct FamilyFlags {
    #[arg(long, value_enum, default_value = "poisson")]
    pub family: FamilyArg,
    /// Poisson rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Binomial trials.
    #[arg(long)]
    pub n: Option<u64>,
    /// Binomial success / negative binomial failure probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// Negative binomial size.
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub family: FamilyFlags,
    /// Continuous CDF at this point.
    #[arg(long, allow_negative_numbers = true, group = "query")]
    pub cdf: Option<f64>,
    /// Discrete probability mass at this count.
    #[arg(long, group = "query")]
    pub pmf: Option<u64>,
    /// Continuous quantile at this level.
    #[arg(long, group = "query")]
    pub quantile: Option<f64>,
    /// Parameter whose continuous alpha-quantile equals this value.
    #[arg(
        long,
        allow_negative_numbers = true,
        group = "query",
        requires = "alpha"
    )]
    pub map_q: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also print the result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with a header row.
    pub csv: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub family: FamilyFlags,
    #[arg(long, value_enum, default_value = "none")]
    pub exposure_mode: ExposureArg,
    /// Covariate columns (default: all columns other than response, exposure and id).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, default_value = "E")]
    pub exposure_col: String,
    #[arg(long, default_value = "area_id")]
    pub id_col: String,
    #[arg(long)]
    pub no_intercept: bool,
    /// Parametric bootstrap covariance with this many replicates.
    #[arg(long, num_args = 0..=1, default_missing_value = "200")]
    pub bootstrap: Option<usize>,
    #[arg(long, env = "MBQR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Print the fit as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON fit to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML file with any of: n_replicates, sample_sizes, alpha_grid,
    /// covariate_sd, base_seed, jitter_replicates.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub covariate_sd: Option<f64>,
    #[arg(long)]
    pub jitter_replicates: Option<usize>,
    #[arg(long, env = "MBQR_SEED")]
    pub seed: Option<u64>,
    /// Write the frequency CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-replicate outcomes to this CSV.
    #[arg(long)]
    pub detail: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// CSV with columns area_id, y, E and covariates.
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, default_value = "E")]
    pub exposure_col: String,
    #[arg(long, default_value = "area_id")]
    pub id_col: String,
    #[arg(long, env = "MBQR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, env = "MBQR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Counts from a Poisson quantile model with intercept and one
    /// covariate `x` uniform on [0, x_max].
    Model {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Intercept and slope.
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_value = "0.5,1.0"
        )]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 1.5)]
        x_max: f64,
        #[arg(long, env = "MBQR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disease-mapping fixture with planted high-risk areas (covariate `hot`).
    RiskFixture {
        #[arg(long, default_value_t = 50)]
        areas: usize,
        #[arg(long, default_value_t = 5)]
        hot: usize,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long, env = "MBQR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> error::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Dist(a) => commands::dist::run(&a),
        Command::Fit(a) => commands::fit::run(&a),
        Command::CrossingExperiment(a) => commands::experiment::run(&a),
        Command::RiskMap(a) => commands::risk::run(&a),
        Command::Verify(a) => commands::verify::run(&a),
        Command::Simulate(c) => commands::simulate::run(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
