//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "vlsae",
    version,
    about = "Train and evaluate vision-language sparse autoencoders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired-embedding file.
    Gen(GenArgs),
    /// Train the auxiliary alignment autoencoder.
    TrainAlign(TrainAlignArgs),
    /// Train a VL-SAE.
    TrainSae(TrainSaeArgs),
    /// Train an SAE-D or SAE-S baseline.
    TrainBaseline(TrainBaselineArgs),
    /// Concept reports and intra/inter similarity over seeded neuron subsets.
    Eval(EvalArgs),
    /// Concepts activated by one pair.
    Interpret(InterpretArgs),
    /// Zero-shot classification with fused concept scores.
    Score(ScoreArgs),
    /// Refine language representations through the concept space.
    Refine(RefineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::TrainAlign(_) => "train-align",
            Command::TrainSae(_) => "train-sae",
            Command::TrainBaseline(_) => "train-baseline",
            Command::Eval(_) => "eval",
            Command::Interpret(_) => "interpret",
            Command::Score(_) => "score",
            Command::Refine(_) => "refine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
    All,
}

/// Input pairs, their train/test split and the optional alignment model.
#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// VLSE embedding-pair file.
    #[arg(long)]
    pub data: PathBuf,
    /// Train:test ratio.
    #[arg(long, default_value = "4:1")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Alignment checkpoint; when given, models work on its intermediate
    /// representations.
    #[arg(long)]
    pub align: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 8)]
    pub concepts: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub per_concept: usize,
    /// Per-coordinate noise std.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use identity modality maps.
    #[arg(long)]
    pub identity_maps: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Optimizer flags; unset values take the stage defaults.
#[derive(Debug, Args, Serialize)]
pub struct OptimArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainAlignArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = vlsae::config::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SaeShapeArgs {
    #[arg(long, default_value_t = vlsae::config::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = vlsae::config::DEFAULT_HIDDEN_RATIO)]
    pub hidden_ratio: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSaeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub shape: SaeShapeArgs,
    /// Keep collapsed encoder rows instead of redrawing them.
    #[arg(long)]
    pub no_resuscitate: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// One SAE per modality.
    SaeD,
    /// One SAE shared by both modalities.
    SaeS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparsifierArg {
    TopK,
    L1,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainBaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub shape: SaeShapeArgs,
    #[arg(long, value_enum)]
    pub variant: Variant,
    #[arg(long, value_enum, default_value = "top-k")]
    pub sparsifier: SparsifierArg,
    #[arg(long, default_value_t = vlsae::config::DEFAULT_L1_COEFF)]
    pub l1_coeff: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model checkpoints to evaluate; repeat for several.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// VLSE file row-aligned with --data whose rows are the scoring
    /// embeddings. Defaults to the data file's latents.
    #[arg(long)]
    pub scoring: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub partition: Partition,
    #[arg(long, default_value_t = vlsae::concept::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = vlsae::concept::DEFAULT_SUBSET)]
    pub subset: usize,
    #[arg(long, default_value_t = vlsae::concept::DEFAULT_TOP_M)]
    pub top_m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decimal places in the CSV.
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
    /// Metrics CSV; each model's report goes to `<out>.<variant>.jsonl`.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Concept report written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
    /// Row index in the data file.
    #[arg(long)]
    pub row: usize,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Also write the interpretation as JSON.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Concept weights to evaluate; 0 (plain cosine) is always included.
    #[arg(long, value_delimiter = ',', default_values_t = vlsae::enhance::ALPHA_C_GRID.to_vec())]
    pub alpha_c: Vec<f64>,
    /// Reweight activations by this report's corpus means.
    #[arg(long)]
    pub reweight: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RefineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// VL-SAE checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub alpha_l: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "test")]
    pub partition: Partition,
    /// VLSE file with the original vision rows and refined language rows.
    #[arg(long, short)]
    pub out: PathBuf,
}
