use std::collections::BTreeMap;
use std::path::Path;

use landsense_core::artifact::{sha256_hex, Provenance};
use landsense_core::dataset::{self, Dataset, DatasetMeta, RebalanceMode};
use landsense_core::forest::{self, ForestModel, ForestParams};
use landsense_core::metrics::experiment::{self, DeploymentSource, ExperimentConfig, SceneSource, Task};
use landsense_core::metrics::{ConfusionMatrix, ScoreReport};
use landsense_core::propagation::PropagationParams;
use landsense_core::scene::{
    deploy_basestations, generate_scene, sample_ue_drops, Deployment, DeploymentPreset, DropSampling,
    LandscapeCategory, SceneMap, SceneSpec,
};
use landsense_core::seeds;
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::{read_input, read_input_text, sidecar_path, OutputDir};

/// Provenance for a command: its flags plus the hashes of its input files.
fn provenance<A: Serialize>(args: &A, inputs: &[&[u8]], seed: u64) -> Provenance {
    #[derive(Serialize)]
    struct Keyed<'a, A> {
        args: &'a A,
        inputs: Vec<String>,
    }
    let inputs = inputs.iter().map(|b| sha256_hex(b)).collect();
    Provenance::for_config(&Keyed { args, inputs }, seed)
}

fn json_pretty<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

fn print_written(paths: &[std::path::PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn scene(args: &SceneArgs) -> CliResult<()> {
    let mut spec = SceneSpec::preset(args.preset.as_deref().unwrap_or("london-like"), args.seed)?;
    if let Some(mix) = &args.mix {
        spec.category_mix = SceneSpec::parse_mix(mix)?;
    }
    if let Some(side) = args.side_m {
        spec.side_m = side;
    }
    if let Some(cell) = args.cell_m {
        spec.cell_m = cell;
    }
    let map = generate_scene(&spec)?;
    let prov = provenance(args, &[], args.seed);

    #[derive(Serialize)]
    struct Summary<'a> {
        provenance: &'a Provenance,
        spec: &'a SceneSpec,
        fractions: BTreeMap<LandscapeCategory, f64>,
    }
    let fractions = map.fractions();
    for (cat, frac) in &fractions {
        println!("{:<9} {:>3}  {:.4}", cat.name(), cat.code(), frac);
    }
    let mut out = OutputDir::create(&args.out, "scene")?;
    out.write("scene.json", map.to_json_with(Some(&prov))?.as_bytes())?;
    out.write("scene_summary.json", &json_pretty(&Summary { provenance: &prov, spec: &spec, fractions })?)?;
    print_written(&out.finish()?);
    Ok(())
}

fn load_scene(path: &Path) -> CliResult<(SceneMap, Vec<u8>)> {
    let bytes = read_input(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
    Ok((SceneMap::from_json(text)?, bytes))
}

fn load_deployment(path: &Path) -> CliResult<(Deployment, Vec<u8>)> {
    let bytes = read_input(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
    Ok((Deployment::from_json(text)?, bytes))
}

pub fn deploy(args: &DeployArgs) -> CliResult<()> {
    let (scene, scene_bytes) = load_scene(&args.scene)?;
    let mut preset = DeploymentPreset::named(&args.preset, args.seed)?;
    if let Some(count) = args.count {
        preset.count = count;
    }
    if let Some(f) = args.frequency_hz {
        preset.frequency_hz = f;
    }
    if let Some(s) = args.sectored {
        preset.sectored = s;
    }
    let deployment = deploy_basestations(&scene, &preset)?;
    let prov = provenance(args, &[&scene_bytes], args.seed);
    println!("{}: K={} at {} Hz", deployment.layer_name, deployment.k(), deployment.frequency_hz);
    let mut out = OutputDir::create(&args.out, "deploy")?;
    out.write("deployment.json", deployment.to_json_with(Some(&prov))?.as_bytes())?;
    print_written(&out.finish()?);
    Ok(())
}

fn write_dataset(out: &mut OutputDir, stem: &str, ds: &Dataset, prov: &Provenance) -> CliResult<()> {
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    out.write(&format!("{stem}.csv"), &csv)?;
    out.write(&format!("{stem}.meta.json"), &json_pretty(&ds.metadata(Some(prov)))?)?;
    Ok(())
}

pub fn dataset(args: &DatasetArgs) -> CliResult<()> {
    let (scene, scene_bytes) = load_scene(&args.scene)?;
    let (deployment, dep_bytes) = load_deployment(&args.deployment)?;
    let (params, config_bytes) = match &args.config {
        Some(path) => {
            let text = read_input_text(path)?;
            (ExperimentConfig::from_json(&text)?.propagation, text.into_bytes())
        }
        None => (PropagationParams::default(), Vec::new()),
    };
    let k = deployment.k();
    let n = args.top_n.unwrap_or(k);
    if n == 0 || n > k {
        return Err(landsense_core::Error::InvalidN { n, k }.into());
    }
    let sampling = match args.sampling {
        SamplingArg::Uniform => DropSampling::Uniform,
        SamplingArg::Stratified => DropSampling::stratified_present(&scene),
    };
    let drops = sample_ue_drops(&scene, args.rows, args.seed, &sampling)?;
    let ds = dataset::build_dataset(&scene, &deployment, &drops, n, &params, args.seed)?;
    let prov = provenance(args, &[&scene_bytes, &dep_bytes, &config_bytes], args.seed);
    println!("{} rows, K={}, N={}", ds.len(), ds.k, ds.n);
    let mut out = OutputDir::create(&args.out, "dataset")?;
    write_dataset(&mut out, &args.name, &ds, &prov)?;
    print_written(&out.finish()?);
    Ok(())
}

fn load_dataset(csv: &Path, meta: Option<&Path>) -> CliResult<(Dataset, Vec<u8>)> {
    let meta_path = meta.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(csv));
    let meta: DatasetMeta = serde_json::from_str(&read_input_text(&meta_path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", meta_path.display())))?;
    let bytes = read_input(csv)?;
    let ds = Dataset::read_csv(bytes.as_slice(), &meta)?;
    Ok((ds, bytes))
}

/// Applies `--binarize` and `--rebalance` in that order.
fn relabel(ds: Dataset, binarize: Option<LandscapeCategory>, rebalance: Option<RebalanceMode>, seed: u64) -> CliResult<Dataset> {
    let ds = match binarize {
        Some(cat) => dataset::binarize_labels(&ds, cat.code())?,
        None => ds,
    };
    Ok(match rebalance {
        Some(mode) => dataset::rebalance(&ds, mode, seeds::derive_seed(seed, seeds::REBALANCE, 0))?,
        None => ds,
    })
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let (ds, bytes) = load_dataset(&args.dataset, args.meta.as_deref())?;
    let ds = relabel(ds, args.binarize, args.rebalance, args.seed)?;
    let params = ForestParams {
        n_trees: args.trees,
        max_depth: args.max_depth,
        min_samples_split: args.min_samples_split,
        features_per_split: args.features_per_split,
        bootstrap: !args.no_bootstrap,
        seed: seeds::derive_seed(args.seed, seeds::FOREST, 0),
    };
    params.validate(ds.k)?;
    let mut model = forest::train_forest(&ds, &params)?;
    model.provenance = Some(provenance(args, &[&bytes], args.seed));
    println!("trained {} trees on {} rows, classes {:?}", model.trees.len(), ds.len(), model.classes);
    let mut out = OutputDir::create(&args.out, "train")?;
    out.write(&format!("{}.json", args.name), &model.to_bytes()?)?;
    print_written(&out.finish()?);
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    provenance: Provenance,
    model_sha256: String,
    dataset_sha256: String,
    rows: usize,
    k: usize,
    n: usize,
    sigma_db: f64,
    binarized_for: Option<LandscapeCategory>,
    rebalanced: Option<RebalanceMode>,
    label_counts: BTreeMap<u32, usize>,
    scores: ScoreReport,
    confusion: ConfusionMatrix,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let model_bytes = read_input(&args.model)?;
    let model = ForestModel::from_bytes(&model_bytes)?;
    let (ds, ds_bytes) = load_dataset(&args.dataset, args.meta.as_deref())?;
    if ds.k != model.k {
        return Err(landsense_core::Error::InvalidFeatures { expected: model.k, got: ds.k }.into());
    }
    let ds = relabel(ds, args.binarize, args.rebalance, args.seed)?;
    let ds = dataset::perturb(&ds, args.sigma_db, seeds::derive_seed(args.seed, seeds::PERTURB, 0))?;

    let mut classes: Vec<u32> = model.classes.clone();
    classes.extend(ds.label_counts().into_keys());
    classes.sort_unstable();
    classes.dedup();
    let other = LandscapeCategory::Other.code();
    let macro_classes: Vec<u32> = if ds.binarized_for.is_some() {
        vec![1]
    } else if args.exclude_other && classes.iter().any(|&c| c != other) {
        classes.iter().copied().filter(|&c| c != other).collect()
    } else {
        classes.clone()
    };
    let eval = experiment::evaluate(&model, &ds, &classes, &macro_classes)?;
    let report = EvalReport {
        provenance: provenance(args, &[&model_bytes, &ds_bytes], args.seed),
        model_sha256: sha256_hex(&model_bytes),
        dataset_sha256: sha256_hex(&ds_bytes),
        rows: ds.len(),
        k: ds.k,
        n: ds.n,
        sigma_db: ds.sigma_db,
        binarized_for: ds.binarized_for,
        rebalanced: ds.rebalanced,
        label_counts: ds.label_counts(),
        scores: eval.scores,
        confusion: eval.confusion,
    };
    print_scores(&report.scores);
    let mut out = OutputDir::create(&args.out, "eval")?;
    out.write(&format!("{}.json", args.name), &json_pretty(&report)?)?;
    print_written(&out.finish()?);
    Ok(())
}

fn print_scores(scores: &ScoreReport) {
    println!("class  precision  recall  support");
    for (c, s) in &scores.per_class {
        println!("{c:>5}  {:>9.4}  {:>6.4}  {:>7}", s.precision, s.recall, s.support);
    }
    println!("macro  {:>9.4}  {:>6.4}  over {:?}", scores.macro_precision, scores.macro_recall, scores.macro_classes);
}

/// Loads `--config` (or the defaults) and applies the override flags.
pub fn resolve_config(o: &Overrides) -> CliResult<ExperimentConfig> {
    let mut config = match &o.config {
        Some(path) => ExperimentConfig::from_json(&read_input_text(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = o.seed {
        config.master_seed = seed;
    }
    if let Some(p) = &o.scene_preset {
        config.scene = SceneSource::Preset(p.clone());
    }
    if let Some(p) = &o.deployment_preset {
        config.deployment = DeploymentSource::Preset(p.clone());
    }
    if let Some(v) = o.train_rows {
        config.dataset.train_rows = v;
    }
    if let Some(v) = o.val_rows {
        config.dataset.val_rows = v;
    }
    if let Some(v) = o.top_n {
        config.dataset.top_n = Some(v);
    }
    if let Some(v) = o.trees {
        config.forest.n_trees = v;
    }
    if let Some(v) = o.sigma_db {
        config.dataset.sigma_db = v;
    }
    if let Some(target) = o.binarize {
        config.dataset.task = Task::Binary { target };
    }
    if let Some(mode) = o.rebalance {
        config.dataset.rebalance = Some(mode);
    }
    for path in [scene_file(&config.scene), deployment_file(&config.deployment)].into_iter().flatten() {
        if !path.is_file() {
            return Err(CliError::Missing(path.to_path_buf()));
        }
    }
    config.validate()?;
    Ok(config)
}

fn scene_file(s: &SceneSource) -> Option<&Path> {
    match s {
        SceneSource::File(p) => Some(p),
        _ => None,
    }
}

fn deployment_file(s: &DeploymentSource) -> Option<&Path> {
    match s {
        DeploymentSource::File(p) => Some(p),
        _ => None,
    }
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let config = resolve_config(&args.overrides)?;
    let result = experiment::sweep_n(&config, &args.n_values, &args.sigma_values, args.replicates)?;
    for (key, series) in &result.series {
        let cells: Vec<String> = series.iter().map(|v| format!("{v:.4}")).collect();
        println!("{key}: N={:?} -> [{}]", result.n_values, cells.join(", "));
    }
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    let mut out = OutputDir::create(&args.out, "sweep")?;
    out.write("config.json", &json_pretty(&config)?)?;
    out.write("sweep.csv", &csv)?;
    out.write("sweep.json", &json_pretty(&result)?)?;
    print_written(&out.finish()?);
    Ok(())
}

pub fn pipeline(args: &PipelineArgs) -> CliResult<()> {
    let config = resolve_config(&args.overrides)?;
    let prov = config.provenance();
    let run = experiment::prepare(&config)?;
    let outcome = experiment::run_prepared(&config, &run)?;
    print_scores(&outcome.report.scores);

    let mut out = OutputDir::create(&args.out, "pipeline")?;
    out.write("config.json", &json_pretty(&config)?)?;
    out.write("scene.json", run.scene.to_json_with(Some(&prov))?.as_bytes())?;
    out.write("deployment.json", run.deployment.to_json_with(Some(&prov))?.as_bytes())?;
    write_dataset(&mut out, "train", &outcome.train, &prov)?;
    write_dataset(&mut out, "val", &outcome.val, &prov)?;
    out.write("model.json", &outcome.model.to_bytes()?)?;
    out.write("report.json", (outcome.report.to_json()? + "\n").as_bytes())?;
    print_written(&out.finish()?);
    Ok(())
}
