use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hetbias_core::Normalization;

pub const DEFAULT_SEED: u64 = 1;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (bad flags, infeasible targets, incompatible three-point shape)
  3  data error (constant or too-short regressor, rank-deficient controls)
  4  numerical failure (no bracket for a*, moment matching failed, validation failed)
  5  input file not found
  6  column missing from input file
  7  empty or non-numeric cell in input file
  8  other read error

Environment:
  HETBIAS_SEED  fallback seed when --seed is not given";

#[derive(Debug, Parser)]
#[command(name = "hetbias", version, about = "Exact bias and minimax scaling of Eicker-White variance estimators", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum positive and negative bias across a grid of a (CSV)
    BiasCurve(BiasCurveArgs),
    /// Large-T normal-regressor curves; same as `bias-curve --asymptotic-normal`
    #[command(name = "figure1-data")]
    Figure1Data(GridArgs),
    /// Numeric and closed-form minimax a for one regressor sequence (JSON)
    Minimax(MinimaxArgs),
    /// Minimax a and maximum bias over moment-matched random regressors (CSV)
    #[command(name = "table1")]
    Table1(Table1Args),
    /// Robust variance estimates and worst-case significance for a dataset
    Audit(AuditArgs),
    /// Run the matrix, enumeration and Monte Carlo cross-checks
    Validate(ValidateArgs),
}

fn parse_normalization(s: &str) -> Result<Normalization, String> {
    s.parse().map_err(|e: hetbias_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Three-point regressor: T values with k = T/(2M^2) at -M and +M, zeros elsewhere
    #[arg(long, num_args = 2, value_names = ["T", "M"])]
    pub three_point: Option<Vec<f64>>,

    /// Random regressor of length T with exactly matched sample skewness and kurtosis
    #[arg(long, num_args = 3, value_names = ["T", "SKEW", "KURT"], allow_negative_numbers = true)]
    pub generate: Option<Vec<f64>>,

    /// Regressor read from a CSV column (use with --col)
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// Column name for --csv
    #[arg(long, value_name = "NAME")]
    pub col: Option<String>,

    #[arg(long, env = "HETBIAS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a_min: f64,

    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    pub a_max: f64,

    /// Number of grid points, endpoints included
    #[arg(long, default_value_t = 161)]
    pub a_steps: usize,

    /// Upper bound U on the error variances
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u: f64,

    /// raw | t2s2-over-u | t-over-u (default t-over-u; asymptotic curves use t2s2-over-u)
    #[arg(long, value_parser = parse_normalization)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Args)]
pub struct BiasCurveArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Large-T limits for a standard normal regressor
    #[arg(long)]
    pub asymptotic_normal: bool,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MinimaxArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u: f64,

    #[arg(long, value_parser = parse_normalization)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    /// Sample size
    #[arg(long, default_value_t = 100)]
    pub t: usize,

    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 4.0])]
    pub kurtosis: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0], allow_negative_numbers = true)]
    pub skewness: Vec<f64>,

    /// Sequences per (kurtosis, skewness) cell
    #[arg(long, default_value_t = 6)]
    pub samples: usize,

    #[arg(long, env = "HETBIAS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u: f64,

    #[arg(long, value_parser = parse_normalization)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,

    /// Response column
    #[arg(long)]
    pub y: String,

    /// Regressor column
    #[arg(long)]
    pub x: String,

    /// Control columns for the screening procedure
    #[arg(long, value_delimiter = ',')]
    pub controls: Vec<String>,

    /// Variance bound U for worst-case bias bounds
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,

    /// Emit the report as JSON
    #[arg(long)]
    pub json: bool,

    /// Headline the interval with a = K + 1 instead of the finite-sample a*
    #[arg(long)]
    pub asymptotic_interval: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Monte Carlo replications per simulated instance
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,

    #[arg(long, env = "HETBIAS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}
