use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landsense_core::dataset::RebalanceMode;
use landsense_core::forest::FeaturesPerSplit;
use landsense_core::scene::LandscapeCategory;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "landsense", version, about = "Landscape sensing from base-station path gains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic landscape map.
    Scene(SceneArgs),
    /// Place a base-station layer on a scene.
    Deploy(DeployArgs),
    /// Drop UEs and write a top-N path-gain dataset.
    Dataset(DatasetArgs),
    /// Train a random forest on a dataset.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Eval(EvalArgs),
    /// Sweep over N and validation noise with several replicates.
    Sweep(SweepArgs),
    /// Run scene, deployment, datasets, training and evaluation from one config.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SceneArgs {
    /// `london-like` or `skewed`; used when `--mix` is absent.
    #[arg(long)]
    pub preset: Option<String>,
    /// Area fractions, e.g. `street=0.25,building=0.35`.
    #[arg(long)]
    pub mix: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub side_m: Option<f64>,
    #[arg(long)]
    pub cell_m: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DeployArgs {
    #[arg(long)]
    #[serde(skip)]
    pub scene: PathBuf,
    /// `london-low` (20 omni, 800 MHz) or `london-high` (18×3 sectors, 5 GHz).
    #[arg(long, default_value = "london-high")]
    pub preset: String,
    /// Overrides the preset's site count.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub frequency_hz: Option<f64>,
    #[arg(long)]
    pub sectored: Option<bool>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingArg {
    Uniform,
    Stratified,
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    #[arg(long)]
    #[serde(skip)]
    pub scene: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub deployment: PathBuf,
    #[arg(long)]
    pub rows: usize,
    /// Strongest gains kept per row; defaults to K.
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SamplingArg::Uniform)]
    pub sampling: SamplingArg,
    /// Experiment config whose `propagation` section is used.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file stem.
    #[arg(long, default_value = "dataset")]
    pub name: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub dataset: PathBuf,
    /// Sidecar JSON; defaults to `<dataset>.meta.json`.
    #[arg(long)]
    #[serde(skip)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    /// An integer, `sqrt` or `all`.
    #[arg(long, default_value = "sqrt")]
    pub features_per_split: FeaturesPerSplit,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One-vs-rest labels for this category.
    #[arg(long)]
    pub binarize: Option<LandscapeCategory>,
    /// Equalize class counts before training (default mode: undersample).
    #[arg(long, num_args = 0..=1, default_missing_value = "undersample")]
    pub rebalance: Option<RebalanceMode>,
    #[arg(long, default_value = "model")]
    pub name: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub dataset: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub meta: Option<PathBuf>,
    /// Gaussian noise (dB) added to live features before scoring.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_db: f64,
    #[arg(long)]
    pub binarize: Option<LandscapeCategory>,
    /// Score on a class-balanced resample of the dataset.
    #[arg(long, num_args = 0..=1, default_missing_value = "undersample")]
    pub rebalance: Option<RebalanceMode>,
    /// Leave `Other` out of macro averages.
    #[arg(long)]
    pub exclude_other: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report")]
    pub name: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Flags that override fields of the experiment config.
#[derive(Debug, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scene_preset: Option<String>,
    #[arg(long)]
    pub deployment_preset: Option<String>,
    #[arg(long)]
    pub train_rows: Option<usize>,
    #[arg(long)]
    pub val_rows: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub sigma_db: Option<f64>,
    /// Switch to one-vs-rest detection of this category.
    #[arg(long)]
    pub binarize: Option<LandscapeCategory>,
    #[arg(long, num_args = 0..=1, default_missing_value = "undersample")]
    pub rebalance: Option<RebalanceMode>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub sigma_values: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub out: PathBuf,
}
