use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sparsegen",
    version,
    about = "Sparse probability mappings, gradient checks and multilabel experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Apply a mapping to one score vector and print JSON.
    Map(MapArgs),
    /// Evaluate a mapping on a 2-D grid and write CSV.
    Grid(GridArgs),
    /// Generate a synthetic multilabel dataset.
    Synth(SynthArgs),
    /// Train a linear model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a trained model on one split.
    Eval(EvalArgs),
    /// Run a sweep over a dataset parameter and write a report CSV.
    Experiment(ExperimentArgs),
    /// Time sort-based against pivot-based simplex projection.
    Bench(BenchArgs),
    /// Compare analytic derivatives with finite differences.
    Gradcheck(GradcheckArgs),
}

/// Mapping selection shared by `map`, `grid` and `gradcheck`.
#[derive(Args, Clone)]
pub struct MappingArgs {
    /// softmax, spherical-softmax, sum-normalization, hardmax, sparsemax,
    /// sparsegen, sparsegen-lin, sparsecone, sparsehourglass,
    /// sum-normalization-pp
    #[arg(long = "fn", value_name = "NAME")]
    pub name: String,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// identity, exp, square or log (sparsegen only)
    #[arg(long)]
    pub transform: Option<String>,
}

#[derive(Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub mapping: MappingArgs,
    /// Comma-separated scores.
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
}

#[derive(Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub mapping: MappingArgs,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub y_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 41)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub num_instances: usize,
    #[arg(long, default_value_t = 10)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 10)]
    pub num_labels: usize,
    /// Mean label count; labels per instance are uniform on {mu-1, mu, mu+1}.
    #[arg(long, conflicts_with_all = ["range", "poisson"])]
    pub mu: Option<usize>,
    /// Labels per instance uniform on {5-r, ..., 5+r}.
    #[arg(long, conflicts_with = "poisson")]
    pub range: Option<usize>,
    /// Poisson mean for the label count.
    #[arg(long)]
    pub poisson: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub doc_length: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.5,0.2,0.3")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Optimizer settings shared by `train` and `experiment`.
#[derive(Args, Clone)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
}

#[derive(Args)]
pub struct TrainArgs {
    /// sparsemax-hinge, sparsemax-huber, sparsehg-hinge, sparsegen-lin-hinge
    /// or softmax-log
    #[arg(long)]
    pub loss: String,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Softmax prediction threshold.
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
    /// Comma-separated thresholds to tune the softmax threshold over.
    #[arg(long)]
    pub p0_grid: Option<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// train, val or test
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Dataset directory; defaults to the one recorded in the model file.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// mean-labels, label-range or doc-length
    #[arg(long)]
    pub setting: String,
    /// Comma-separated sweep values.
    #[arg(long)]
    pub values: String,
    /// Comma-separated loss names.
    #[arg(
        long,
        default_value = "softmax-log,sparsemax-huber,sparsemax-hinge,sparsehg-hinge"
    )]
    pub arms: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = 5000)]
    pub num_instances: usize,
    #[arg(long, default_value_t = 2000)]
    pub doc_length: usize,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated dimensions.
    #[arg(long, default_value = "10,100,1000,10000,100000")]
    pub dims: String,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// A mapping name or a loss name.
    #[arg(long)]
    pub target: String,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}
