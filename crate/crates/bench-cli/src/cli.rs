use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "asrl-bench",
    version,
    about = "Compare ASRL with squared, absolute and Huber losses on tabular regression data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per loss on a shared split and report test metrics.
    Bench(BenchArgs),
    /// Tabulate the ASRL loss over a symmetric residual grid.
    Losscurve(LossCurveArgs),
    /// Emit test-set truth/prediction pairs for one loss.
    Scatter(ScatterArgs),
    /// Combine bench reports into a dataset-by-loss MSE grid.
    Summary(SummaryArgs),
}

/// Where to find data; `--dataset` itself lives on each subcommand.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory holding the registered dataset files.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    /// Target column; required when the dataset is a file path.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated feature columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurvatureArg {
    Exact,
    Irls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Asrl,
    Squared,
    Absolute,
    Huber,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Boosting rounds.
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    /// Shrinkage applied to every tree.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// Minimum hessian sum in each child of a split.
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Quantile of |r| separating the quadratic and linear regions.
    #[arg(long, default_value_t = 0.5)]
    pub q_low: f64,
    /// Quantile of |r| separating the linear and logarithmic regions.
    #[arg(long, default_value_t = 0.9)]
    pub q_high: f64,
    /// Stabilizer added to each dispersion before inversion.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Lower bound on per-row hessians.
    #[arg(long, default_value_t = 1e-6)]
    pub h_floor: f64,
    #[arg(long, default_value_t = 1.0)]
    pub huber_delta: f64,
    /// Seed for the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Newton weight: exact second derivative or psi(r)/r.
    #[arg(long, value_enum, default_value_t = CurvatureArg::Irls)]
    pub curvature: CurvatureArg,
    /// Keep ASRL gradients in raw units instead of dividing by alpha.
    #[arg(long)]
    pub no_scale_norm: bool,
    /// Z-score features with training-set statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Disable data-parallel work inside each training run.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Registered dataset name or path to a delimited file.
    #[arg(long)]
    pub dataset: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write each trained model as `<dataset>-<loss>.json` into this directory.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Train the four models on separate threads.
    #[arg(long)]
    pub concurrent: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LossCurveArgs {
    #[arg(long, default_value_t = 1.0)]
    pub delta1: f64,
    #[arg(long, default_value_t = 3.0)]
    pub delta2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Grid covers [-range, range] (default: 2 * delta2, or 5 if that is 0).
    #[arg(long)]
    pub range: Option<f64>,
    /// Grid spacing (default: range / 50).
    #[arg(long)]
    pub step: Option<f64>,
    /// Take the state from an ASRL model trained on this dataset instead of
    /// the explicit flags.
    #[arg(long)]
    pub from_dataset: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Write the curve here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScatterArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = LossArg::Asrl)]
    pub loss: LossArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Write the pairs here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Save the trained model as JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SummaryArgs {
    /// Report files written by `bench --out`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Write the grid here as well as to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
