use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum, ValueHint};

/// Decision-boundary experiments: datasets, models, attacks, bounds and
/// adversarial active learning.
#[derive(Debug, Parser)]
#[command(name = "boundarylab", version, propagate_version = true)]
pub struct Cli {
    /// `key = value` file supplying defaults for any long flag of the command.
    #[arg(long, global = true, value_hint = ValueHint::FilePath)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate or load datasets as CSV.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Fit a model on a CSV dataset and save it as JSON.
    Train(TrainArgs),
    /// Attack a saved model at every row of a CSV dataset.
    Attack(AttackArgs),
    /// Correctness-region experiments and bound evaluation.
    Theory {
        #[command(subcommand)]
        cmd: TheoryCmd,
    },
    /// Train, generate, retrain over strategies, budgets and seeds.
    Al(AlArgs),
    /// Render an `al` CSV as a markdown table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Sample a synthetic dataset.
    Gen(GenArgs),
    /// Convert MNIST IDX, abalone or CSV data.
    Load(LoadArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Two interleaved noisy arcs.
    Halfmoon,
    /// Halfmoon geometry, sampled from mu_beta with Bernoulli(eta) labels.
    Beta,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Option<GenKind>,
    #[arg(long, default_value_t = 1800)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concentration exponent for `--kind beta`.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub density_floor: f64,
    #[arg(long, default_value = "train")]
    pub role: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoadKind {
    Mnist,
    Abalone,
    Csv,
}

#[derive(Debug, Args)]
pub struct LoadArgs {
    #[arg(long, value_enum)]
    pub kind: Option<LoadKind>,
    /// IDX image file, plain or gzipped (default: `$BOUNDARYLAB_DATA_DIR/mnist/...`).
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub images: Option<PathBuf>,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub labels: Option<PathBuf>,
    /// Digits to keep, relabeled 0.. in the given order.
    #[arg(long, value_delimiter = ',', default_value = "1,7")]
    pub digits: Vec<usize>,
    /// Abalone or CSV source file.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub path: Option<PathBuf>,
    /// Class count of a CSV source.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Stratified split sizes: `train,test` or `train,adversary,test`.
    #[arg(long, value_delimiter = ',')]
    pub split: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV without `--split` (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving one CSV per split part.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// `knn:K`, `nw:H[:KERNEL]`, `krr:LAMBDA[:KERNEL[:GAMMA]]` or `mlp[:H1,H2[:EPOCHS[:LR]]]`.
    #[arg(long, default_value = "knn:1")]
    pub model: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out CSV whose accuracy is reported.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub test: Option<PathBuf>,
    /// Model JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Attack settings shared by `attack` and `al`.
#[derive(Debug, Clone, Args)]
pub struct AttackFlags {
    /// Step size for FGSM and the kernel substitute, ball radius for PGD.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Candidate cells of approximate RBA.
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Fixed direct-attack radius factor; bisection search when omitted.
    #[arg(long)]
    pub direct_factor: Option<f64>,
    #[arg(long)]
    pub kernel_c: Option<f64>,
    #[arg(long)]
    pub overshoot: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub cw_iterations: Option<usize>,
    #[arg(long)]
    pub bbox_directions: Option<usize>,
    #[arg(long)]
    pub bbox_ray_step: Option<f64>,
    #[arg(long)]
    pub bbox_max_radius: Option<f64>,
    #[arg(long)]
    pub bbox_tol: Option<f64>,
    #[arg(long)]
    pub bbox_refine: Option<usize>,
    /// Nearest differently-labeled points whose directions BBox-OPT tries first.
    #[arg(long)]
    pub bbox_anchors: Option<usize>,
    /// Clip attack outputs to the unit box.
    #[arg(long)]
    pub clip: bool,
    #[arg(long)]
    pub attack_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub model: Option<PathBuf>,
    /// Points to attack; their labels are ignored.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long)]
    pub method: Option<String>,
    /// Perturbation shrink factor applied to every output.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Attack only the first N rows.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub attack: AttackFlags,
    /// Adversarial-example CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCmd {
    /// Correct-region fraction as training data concentrates at the boundary.
    BetaSweep(BetaSweepArgs),
    /// Evaluate the correctness-set bound constants.
    Bounds(BoundsArgs),
    /// Monte-Carlo check of the k-NN deviation bound.
    Verify(VerifyArgs),
    /// Grid correctness region of a saved model.
    Region(RegionArgs),
}

#[derive(Debug, Args)]
pub struct BetaSweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// `knn`, `nw`, `krr`, `mlp` or full model specs.
    #[arg(long, value_delimiter = ',', default_value = "knn,nw")]
    pub estimator: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.15)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub density_floor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Which bound: 1 (k-NN), 2 (Nadaraya-Watson), 3 (kernel ridge).
    #[arg(long)]
    pub thm: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lipschitz: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_dp: f64,
    /// Bandwidth for bounds 2 and 3.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Confidence term `t` (default `(ln n)^2`).
    #[arg(long)]
    pub t: Option<f64>,
    /// Density at the evaluation point.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long)]
    pub lambda_n: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Estimated from the ground truth when omitted.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub lipschitz_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_dp: f64,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long, default_value_t = 5000)]
    pub reference_samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub density_floor: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Per-grid-point CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlDataset {
    /// Fresh Halfmoon train, pool and test draws per seed.
    Halfmoon,
    /// MNIST digits 1 and 7; the pool is the victim's training split.
    Mnist1v7,
    /// Train, pool and test CSV files.
    Csv,
}

#[derive(Debug, Args)]
pub struct AlArgs {
    #[arg(long, value_enum)]
    pub dataset: Option<AlDataset>,
    #[arg(long, default_value = "knn:1")]
    pub victim: String,
    #[arg(long, default_value_t = 0)]
    pub victim_seed: u64,
    /// Shadow model spec (default: the victim's).
    #[arg(long)]
    pub shadow: Option<String>,
    /// Surrogate for DFAL and max-confidence ranking.
    #[arg(long)]
    pub surrogate: Option<String>,
    /// Attacks behind the `adversarial` and `augmented` strategies.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "direct,rba,kernel_sub,bbox"
    )]
    pub attacks: Vec<String>,
    /// `random`, `margin`, `dfal`, `max_confidence`, `adversarial`,
    /// `augmented`, an attack name or `aug:ATTACK`. Random always runs.
    #[arg(long, value_delimiter = ',', default_value = "random,adversarial")]
    pub strategy: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "2000")]
    pub budgets: Vec<usize>,
    /// Adversary seeds 0..N.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Perturbation shrink factor before querying.
    #[arg(long, default_value_t = 0.9)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.5)]
    pub warmup: f64,
    #[arg(long)]
    pub dfal_magnitude: Option<f64>,
    #[command(flatten)]
    pub attack: AttackFlags,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1800)]
    pub train_size: usize,
    /// Halfmoon pool size (default: the largest budget, at least 2000).
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub test_size: usize,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub images: Option<PathBuf>,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub labels: Option<PathBuf>,
    /// MNIST train and test sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000,500")]
    pub split: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub train: Option<PathBuf>,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub pool: Option<PathBuf>,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// CSV written by `al`.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub input: Option<PathBuf>,
    /// Markdown file (stdout only when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
