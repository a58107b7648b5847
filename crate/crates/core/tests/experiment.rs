use landsense_core::dataset::RebalanceMode;
use landsense_core::metrics::experiment::{
    run_experiment, series_key, sweep_n, ExperimentConfig, PerturbStage, SceneSource, DeploymentSource, Task,
};
use landsense_core::scene::LandscapeCategory;

fn small(target: LandscapeCategory) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.master_seed = 5;
    c.deployment = DeploymentSource::Preset("london-low".into());
    c.dataset.train_rows = 600;
    c.dataset.val_rows = 400;
    c.dataset.task = Task::Binary { target };
    c.forest.n_trees = 8;
    c
}

#[test]
fn binary_report_is_reproducible() {
    let config = small(LandscapeCategory::Street);
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert_eq!(a.report.confusion.classes, vec![0, 1]);
    assert_eq!(a.report.k, 20);
    assert_eq!(a.report.n, 20);
    assert_eq!(a.report.confusion.total(), 400);
    assert_eq!(a.model.to_bytes().unwrap(), b.model.to_bytes().unwrap());
}

#[test]
fn master_seed_changes_the_run() {
    let config = small(LandscapeCategory::Street);
    let other = ExperimentConfig { master_seed: 6, ..config.clone() };
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&other).unwrap();
    assert_ne!(a.report.seeds, b.report.seeds);
    assert_ne!(a.train.rows, b.train.rows);
}

#[test]
fn rebalancing_touches_only_training_rows() {
    let plain = small(LandscapeCategory::Forest);
    let balanced = ExperimentConfig {
        dataset: landsense_core::metrics::experiment::DatasetConfig {
            rebalance: Some(RebalanceMode::Undersample),
            ..plain.dataset.clone()
        },
        ..plain.clone()
    };
    let a = run_experiment(&plain).unwrap();
    let b = run_experiment(&balanced).unwrap();
    assert_eq!(a.val.rows, b.val.rows);
    let counts: Vec<usize> = b.report.train_label_counts.values().copied().collect();
    assert_eq!(counts.len(), 2);
    assert_eq!(counts[0], counts[1]);
    assert!(counts[0] < a.report.train_label_counts.values().copied().max().unwrap());
}

#[test]
fn noise_touches_only_validation_rows() {
    let plain = small(LandscapeCategory::Street);
    let mut noisy = plain.clone();
    noisy.dataset.sigma_db = 3.0;
    let a = run_experiment(&plain).unwrap();
    let b = run_experiment(&noisy).unwrap();
    assert_eq!(a.train.rows, b.train.rows);
    assert_eq!(a.val.labels(), b.val.labels());
    assert_ne!(a.val.rows, b.val.rows);

    noisy.dataset.perturb_stage = PerturbStage::BeforeSelection;
    noisy.dataset.top_n = Some(5);
    let c = run_experiment(&noisy).unwrap();
    let floor = landsense_core::dataset::DEFAULT_SENTINEL_DB;
    for row in &c.val.rows {
        assert_eq!(row.features_db.len(), 20);
        assert!(row.features_db.iter().all(|&g| g >= floor));
        assert!(row.features_db.iter().filter(|&&g| g > floor).count() <= 5);
    }
}

#[test]
fn multiclass_macro_can_leave_out_other() {
    let mut config = small(LandscapeCategory::Street);
    config.dataset.task = Task::Multiclass {
        classes: vec![LandscapeCategory::Barren, LandscapeCategory::Street, LandscapeCategory::Building],
    };
    let with = run_experiment(&config).unwrap();
    assert_eq!(with.report.scores.macro_classes, vec![0, 4, 11, 15]);
    config.macro_include_other = false;
    let without = run_experiment(&config).unwrap();
    assert_eq!(without.report.scores.macro_classes, vec![4, 11, 15]);
    assert_eq!(with.report.confusion, without.report.confusion);
    let s = &without.report.scores;
    let mean = [4, 11, 15].iter().map(|c| s.per_class[c].precision).sum::<f64>() / 3.0;
    assert_eq!(s.macro_precision, mean);
}

#[test]
fn sweep_shapes_and_replay() {
    let mut config = small(LandscapeCategory::Street);
    config.dataset.train_rows = 300;
    config.dataset.val_rows = 200;
    config.forest.n_trees = 4;
    let ns = [2, 5, 10, 20];
    let sweep = sweep_n(&config, &ns, &[0.0, 2.0], 2).unwrap();
    assert_eq!(sweep.cells.len(), ns.len() * 2 * 2 * 2);
    for metric in ["precision", "recall"] {
        for sigma in [0.0, 2.0] {
            assert_eq!(sweep.series[&series_key(metric, sigma)].len(), ns.len());
            assert_eq!(sweep.median_series(metric, sigma).len(), ns.len());
        }
    }
    assert_eq!(sweep.replicate_seeds.len(), 2);
    assert_ne!(sweep.replicate_seeds[0], sweep.replicate_seeds[1]);
    let again = sweep_n(&config, &ns, &[0.0, 2.0], 2).unwrap();
    assert_eq!(sweep, again);

    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next(), Some("N,sigma_db,replicate,metric,value"));
    assert_eq!(text.lines().count(), 1 + sweep.cells.len());
}

#[test]
fn sweep_rejects_bad_inputs() {
    let config = small(LandscapeCategory::Street);
    assert!(sweep_n(&config, &[21], &[0.0], 1).is_err());
    assert!(sweep_n(&config, &[0], &[0.0], 1).is_err());
    assert!(sweep_n(&config, &[2], &[-1.0], 1).is_err());
    assert!(sweep_n(&config, &[2], &[0.0], 0).is_err());
    assert!(sweep_n(&config, &[], &[0.0], 1).is_err());
}

#[test]
fn config_json_round_trip_and_validation() {
    let config = small(LandscapeCategory::Building);
    let text = serde_json::to_string(&config).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), config);
    assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    assert!(ExperimentConfig::from_json("{\"dataset\": {\"train_rows\": \"many\"}}").is_err());

    let mut bad = config.clone();
    bad.dataset.sigma_db = -1.0;
    assert!(bad.validate().is_err());
    let mut bad = config;
    bad.scene = SceneSource::Preset("atlantis".into());
    assert!(run_experiment(&bad).is_err());
}
