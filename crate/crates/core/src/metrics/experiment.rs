//! End-to-end experiment driver: scene, deployment, drops, datasets, forest
//! training and scoring, plus sweeps over `N` and validation noise.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::dataset::{self, Dataset, RebalanceMode};
use crate::error::{Error, Result};
use crate::forest::{self, ForestModel, ForestParams};
use crate::metrics::{self, ConfusionMatrix, ScoreReport};
use crate::propagation::{PathGainVector, PropagationParams};
use crate::scene::{
    deploy_basestations, generate_scene, sample_ue_drops, Deployment, DeploymentPreset, DropSampling,
    LandscapeCategory, SceneMap, SceneSpec,
};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    /// Named preset; the layout seed is derived from the master seed.
    Preset(String),
    Spec(SceneSpec),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentSource {
    /// Named preset; the placement seed is derived from the master seed.
    Preset(String),
    Custom(DeploymentPreset),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// One-vs-rest detection of a single category.
    Binary { target: LandscapeCategory },
    /// The listed categories; everything else is folded into `Other`.
    Multiclass { classes: Vec<LandscapeCategory> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbStage {
    /// Noise on the masked features (sentinels untouched).
    #[default]
    AfterSelection,
    /// Noise on the raw gains, then top-N selection.
    BeforeSelection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Drops follow the scene's area fractions.
    #[default]
    Uniform,
    /// Equal drop counts for every category present.
    Stratified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub train_rows: usize,
    pub val_rows: usize,
    /// Number of strongest gains kept; `None` keeps all `K`.
    pub top_n: Option<usize>,
    pub task: Task,
    /// Applied to the training set only.
    pub rebalance: Option<RebalanceMode>,
    /// Noise added to the validation set only.
    pub sigma_db: f64,
    pub perturb_stage: PerturbStage,
    pub sampling: Sampling,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train_rows: 20_000,
            val_rows: 20_000,
            top_n: None,
            task: Task::Binary { target: LandscapeCategory::Street },
            rebalance: None,
            sigma_db: 0.0,
            perturb_stage: PerturbStage::AfterSelection,
            sampling: Sampling::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub scene: SceneSource,
    pub deployment: DeploymentSource,
    pub propagation: PropagationParams,
    pub dataset: DatasetConfig,
    /// `forest.seed` selects a sub-stream of the master seed.
    pub forest: ForestParams,
    /// Whether `Other` counts towards multiclass macro averages.
    pub macro_include_other: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            scene: SceneSource::Preset("london-like".into()),
            deployment: DeploymentSource::Preset("london-high".into()),
            propagation: PropagationParams::default(),
            dataset: DatasetConfig::default(),
            forest: ForestParams::default(),
            macro_include_other: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::for_config(self, self.master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.train_rows == 0 || self.dataset.val_rows == 0 {
            return Err(Error::InvalidParams("train_rows and val_rows must be >= 1".into()));
        }
        if !(self.dataset.sigma_db >= 0.0) {
            return Err(Error::InvalidParams("sigma_db must be >= 0".into()));
        }
        if let Task::Multiclass { classes } = &self.dataset.task {
            if classes.is_empty() {
                return Err(Error::InvalidParams("multiclass task needs at least one class".into()));
            }
        }
        self.propagation.validate()
    }

    /// Codes the evaluation reports on.
    pub fn class_codes(&self) -> Vec<u32> {
        match &self.dataset.task {
            Task::Binary { .. } => vec![0, 1],
            Task::Multiclass { classes } => {
                let mut codes: Vec<u32> = classes.iter().map(|c| c.code()).collect();
                codes.push(LandscapeCategory::Other.code());
                codes.sort_unstable();
                codes.dedup();
                codes
            }
        }
    }

    fn macro_classes(&self) -> Vec<u32> {
        match &self.dataset.task {
            Task::Binary { .. } => vec![1],
            Task::Multiclass { .. } => {
                let other = LandscapeCategory::Other.code();
                let all = self.class_codes();
                let without: Vec<u32> = all.iter().copied().filter(|&c| c != other).collect();
                if self.macro_include_other || without.is_empty() { all } else { without }
            }
        }
    }
}

pub fn load_scene(source: &SceneSource, master_seed: u64) -> Result<SceneMap> {
    match source {
        SceneSource::Preset(name) => {
            generate_scene(&SceneSpec::preset(name, seeds::derive_seed(master_seed, seeds::SCENE, 0))?)
        }
        SceneSource::Spec(spec) => generate_scene(spec),
        SceneSource::File(path) => SceneMap::from_json(&std::fs::read_to_string(path)?),
    }
}

pub fn load_deployment(source: &DeploymentSource, scene: &SceneMap, master_seed: u64) -> Result<Deployment> {
    match source {
        DeploymentSource::Preset(name) => deploy_basestations(
            scene,
            &DeploymentPreset::named(name, seeds::derive_seed(master_seed, seeds::DEPLOYMENT, 0))?,
        ),
        DeploymentSource::Custom(preset) => deploy_basestations(scene, preset),
        DeploymentSource::File(path) => Deployment::from_json(&std::fs::read_to_string(path)?),
    }
}

/// Raw gain vectors for both splits, computed once and reusable across
/// every `N` and noise level.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub scene: SceneMap,
    pub deployment: Deployment,
    pub train_gains: Vec<PathGainVector>,
    pub train_labels: Vec<u32>,
    pub val_gains: Vec<PathGainVector>,
    pub val_labels: Vec<u32>,
}

/// Seeds every random step of one run, all derived from the master seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master: u64,
    pub train_drops: u64,
    pub val_drops: u64,
    pub train_shadow: u64,
    pub val_shadow: u64,
    pub rebalance: u64,
    pub perturb: u64,
    pub forest: u64,
}

impl RunSeeds {
    pub fn new(master: u64, forest_stream: u64) -> Self {
        let d = |domain| seeds::derive_seed(master, domain, 0);
        Self {
            master,
            train_drops: d(seeds::TRAIN_DROPS),
            val_drops: d(seeds::VAL_DROPS),
            train_shadow: d(seeds::TRAIN_SHADOW),
            val_shadow: d(seeds::VAL_SHADOW),
            rebalance: d(seeds::REBALANCE),
            perturb: d(seeds::PERTURB),
            forest: seeds::derive_seed(master, seeds::FOREST, forest_stream),
        }
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedRun> {
    config.validate()?;
    let seeds = RunSeeds::new(config.master_seed, config.forest.seed);
    let scene = load_scene(&config.scene, config.master_seed)?;
    let deployment = load_deployment(&config.deployment, &scene, config.master_seed)?;
    let sampling = match config.dataset.sampling {
        Sampling::Uniform => DropSampling::Uniform,
        Sampling::Stratified => DropSampling::stratified_present(&scene),
    };
    let side = |rows, drop_seed, shadow_seed| -> Result<(Vec<PathGainVector>, Vec<u32>)> {
        let drops = sample_ue_drops(&scene, rows, drop_seed, &sampling)?;
        let gains = dataset::compute_gains(&scene, &deployment, &drops, &config.propagation, shadow_seed)?;
        Ok((gains, drops.iter().map(|d| d.category.code()).collect()))
    };
    let (train_gains, train_labels) = side(config.dataset.train_rows, seeds.train_drops, seeds.train_shadow)?;
    let (val_gains, val_labels) = side(config.dataset.val_rows, seeds.val_drops, seeds.val_shadow)?;
    Ok(PreparedRun { scene, deployment, train_gains, train_labels, val_gains, val_labels })
}

fn apply_task(ds: &Dataset, task: &Task) -> Result<Dataset> {
    match task {
        Task::Binary { target } => dataset::binarize_labels(ds, target.code()),
        Task::Multiclass { classes } => dataset::restrict_labels(ds, classes),
    }
}

/// Training set for one `N`: masked, relabelled and optionally rebalanced.
pub fn training_set(config: &ExperimentConfig, run: &PreparedRun, n: usize) -> Result<Dataset> {
    let seeds = RunSeeds::new(config.master_seed, config.forest.seed);
    let sentinel = config.propagation.min_gain_db;
    let raw = Dataset::from_gains(&run.train_gains, &run.train_labels, n, sentinel, &run.deployment.layer_name, seeds.train_shadow)?;
    let ds = apply_task(&raw, &config.dataset.task)?;
    match config.dataset.rebalance {
        Some(mode) => dataset::rebalance(&ds, mode, seeds.rebalance),
        None => Ok(ds),
    }
}

/// Validation set for one `N` and noise level.
pub fn validation_set(config: &ExperimentConfig, run: &PreparedRun, n: usize, sigma_db: f64) -> Result<Dataset> {
    let seeds = RunSeeds::new(config.master_seed, config.forest.seed);
    let sentinel = config.propagation.min_gain_db;
    let layer = &run.deployment.layer_name;
    let ds = match config.dataset.perturb_stage {
        PerturbStage::AfterSelection => {
            let clean = Dataset::from_gains(&run.val_gains, &run.val_labels, n, sentinel, layer, seeds.val_shadow)?;
            dataset::perturb(&clean, sigma_db, seeds.perturb)?
        }
        PerturbStage::BeforeSelection => {
            if !(sigma_db >= 0.0) {
                return Err(Error::InvalidParams("sigma_db must be >= 0".into()));
            }
            let noisy = dataset::perturb_gains(&run.val_gains, sigma_db, sentinel, seeds.perturb);
            let mut ds = Dataset::from_gains(&noisy, &run.val_labels, n, sentinel, layer, seeds.val_shadow)?;
            ds.sigma_db = sigma_db;
            ds
        }
    };
    apply_task(&ds, &config.dataset.task)
}

pub fn train(config: &ExperimentConfig, train: &Dataset) -> Result<ForestModel> {
    let seeds = RunSeeds::new(config.master_seed, config.forest.seed);
    let params = ForestParams { seed: seeds.forest, ..config.forest.clone() };
    let mut model = forest::train_forest(train, &params)?;
    model.provenance = Some(config.provenance());
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub scores: ScoreReport,
}

/// Scores `model` on `val` over `classes`, averaging over `macro_classes`.
pub fn evaluate(model: &ForestModel, val: &Dataset, classes: &[u32], macro_classes: &[u32]) -> Result<Evaluation> {
    let rows: Vec<Vec<f64>> = val.rows.iter().map(|r| r.features_db.clone()).collect();
    let preds = model.predict_all(&rows)?;
    let mut all: Vec<u32> = classes.to_vec();
    all.extend(model.classes.iter().copied());
    all.extend(val.label_counts().into_keys());
    let confusion = metrics::confusion_matrix(&val.labels(), &preds, &all)?;
    let scores = metrics::macro_scores(&confusion, macro_classes)?;
    Ok(Evaluation { confusion, scores })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub seeds: RunSeeds,
    pub config: ExperimentConfig,
    pub k: usize,
    pub n: usize,
    pub train_label_counts: BTreeMap<u32, usize>,
    pub val_label_counts: BTreeMap<u32, usize>,
    pub scores: ScoreReport,
    pub confusion: ConfusionMatrix,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub model: ForestModel,
    pub train: Dataset,
    pub val: Dataset,
}

/// One train/evaluate cycle. Rebalancing touches only the training set and
/// noise only the validation set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let run = prepare(config)?;
    run_prepared(config, &run)
}

pub fn run_prepared(config: &ExperimentConfig, run: &PreparedRun) -> Result<ExperimentOutcome> {
    let k = run.deployment.k();
    let n = config.dataset.top_n.unwrap_or(k);
    let train_ds = training_set(config, run, n)?;
    let val_ds = validation_set(config, run, n, config.dataset.sigma_db)?;
    let model = train(config, &train_ds)?;
    let eval = evaluate(&model, &val_ds, &config.class_codes(), &config.macro_classes())?;
    let report = ExperimentReport {
        provenance: config.provenance(),
        seeds: RunSeeds::new(config.master_seed, config.forest.seed),
        config: config.clone(),
        k,
        n,
        train_label_counts: train_ds.label_counts(),
        val_label_counts: val_ds.label_counts(),
        scores: eval.scores,
        confusion: eval.confusion,
    };
    Ok(ExperimentOutcome { report, model, train: train_ds, val: val_ds })
}

/// Headline numbers of one evaluation: class-1 precision/recall for binary
/// tasks, macro averages otherwise.
pub fn headline_metrics(config: &ExperimentConfig, scores: &ScoreReport) -> Vec<(&'static str, f64)> {
    match config.dataset.task {
        Task::Binary { .. } => {
            let s = &scores.per_class[&1];
            vec![("precision", s.precision), ("recall", s.recall)]
        }
        Task::Multiclass { .. } => {
            vec![("macro_precision", scores.macro_precision), ("macro_recall", scores.macro_recall)]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub sigma_db: f64,
    pub replicate: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub n_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
    pub replicate_seeds: Vec<u64>,
    pub metrics: Vec<String>,
    /// Mean across replicates, keyed `metric@sigma=<σ>`, one entry per `N`.
    pub series: BTreeMap<String, Vec<f64>>,
    pub cells: Vec<SweepCell>,
}

pub fn series_key(metric: &str, sigma_db: f64) -> String {
    format!("{metric}@sigma={sigma_db}")
}

impl SweepResult {
    /// Per-replicate values of one (N, σ, metric) cell.
    pub fn values(&self, metric: &str, n: usize, sigma_db: f64) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.metric == metric && c.n == n && c.sigma_db == sigma_db)
            .map(|c| c.value)
            .collect()
    }

    /// Median across replicates for each `N`.
    pub fn median_series(&self, metric: &str, sigma_db: f64) -> Vec<f64> {
        self.n_values
            .iter()
            .map(|&n| metrics::median(&self.values(metric, n, sigma_db)).unwrap_or(f64::NAN))
            .collect()
    }

    /// `N,sigma_db,replicate,metric,value`, one line per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,sigma_db,replicate,metric,value")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{},{}", c.n, c.sigma_db, c.replicate, c.metric, c.value)?;
        }
        Ok(())
    }
}

/// Trains once per (replicate, N) and scores every σ against that model.
/// Replicate `r` runs the whole pipeline under master seed
/// `derive_seed(master, REPLICATE, r)`.
pub fn sweep_n(config: &ExperimentConfig, n_values: &[usize], sigma_values: &[f64], replicates: usize) -> Result<SweepResult> {
    if n_values.is_empty() || sigma_values.is_empty() || replicates == 0 {
        return Err(Error::InvalidParams("sweep needs N values, sigma values and replicates".into()));
    }
    if let Some(s) = sigma_values.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidParams(format!("sigma {s} must be >= 0")));
    }
    let replicate_seeds: Vec<u64> =
        (0..replicates).map(|r| seeds::derive_seed(config.master_seed, seeds::REPLICATE, r as u64)).collect();
    let mut cells = Vec::new();
    let mut metric_names: Vec<String> = Vec::new();
    for (r, &seed) in replicate_seeds.iter().enumerate() {
        let cfg = ExperimentConfig { master_seed: seed, ..config.clone() };
        let run = prepare(&cfg)?;
        let k = run.deployment.k();
        if let Some(&bad) = n_values.iter().find(|&&n| n == 0 || n > k) {
            return Err(Error::InvalidN { n: bad, k });
        }
        for &n in n_values {
            let model = train(&cfg, &training_set(&cfg, &run, n)?)?;
            for &sigma in sigma_values {
                let val = validation_set(&cfg, &run, n, sigma)?;
                let eval = evaluate(&model, &val, &cfg.class_codes(), &cfg.macro_classes())?;
                for (metric, value) in headline_metrics(&cfg, &eval.scores) {
                    if !metric_names.iter().any(|m| m == metric) {
                        metric_names.push(metric.to_string());
                    }
                    cells.push(SweepCell { n, sigma_db: sigma, replicate: r, metric: metric.to_string(), value });
                }
            }
        }
    }
    let mut series = BTreeMap::new();
    for metric in &metric_names {
        for &sigma in sigma_values {
            let means = n_values
                .iter()
                .map(|&n| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| &c.metric == metric && c.n == n && c.sigma_db == sigma)
                        .map(|c| c.value)
                        .collect();
                    metrics::mean(&v).unwrap_or(f64::NAN)
                })
                .collect();
            series.insert(series_key(metric, sigma), means);
        }
    }
    Ok(SweepResult {
        provenance: config.provenance(),
        n_values: n_values.to_vec(),
        sigma_values: sigma_values.to_vec(),
        replicate_seeds,
        metrics: metric_names,
        series,
        cells,
    })
}
