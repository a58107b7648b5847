use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn landsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landsense")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = landsense(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    landsense(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Scene plus 5 GHz deployment in `dir`.
fn scene_and_deployment(dir: &Path) -> (PathBuf, PathBuf) {
    ok(&["scene", "--preset", "london-like", "--seed", "3", "--out", p(dir)]);
    ok(&["deploy", "--scene", p(&dir.join("scene.json")), "--preset", "london-high", "--seed", "3", "--out", p(dir)]);
    (dir.join("scene.json"), dir.join("deployment.json"))
}

#[test]
fn scene_prints_fractions_of_the_written_grid() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(&["scene", "--preset", "london-like", "--seed", "1", "--out", p(dir.path())]);
    let scene = json(&dir.path().join("scene.json"));
    let mut counts = std::collections::BTreeMap::<u64, u64>::new();
    for run in scene["grid_rle"].as_array().unwrap() {
        *counts.entry(run[0].as_u64().unwrap()).or_default() += run[1].as_u64().unwrap();
    }
    let total: u64 = counts.values().sum();
    assert_eq!(total, 200 * 200);
    for line in stdout.lines().filter(|l| !l.starts_with("wrote")) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let code: u64 = cols[1].parse().unwrap();
        let printed: f64 = cols[2].parse().unwrap();
        assert!((printed - counts[&code] as f64 / total as f64).abs() < 5e-5, "{line}");
    }
    assert_eq!(scene["provenance"]["master_seed"], 1);
}

#[test]
fn scene_rerun_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        ok(&["scene", "--preset", "skewed", "--seed", "9", "--out", p(d.path())]);
    }
    assert_eq!(fs::read(a.path().join("scene.json")).unwrap(), fs::read(b.path().join("scene.json")).unwrap());
    assert_eq!(json(&a.path().join("manifest.json")), json(&b.path().join("manifest.json")));
}

#[test]
fn bad_mix_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["scene", "--mix", "street=0.7,building=0.5", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["scene", "--mix", "lake=0.1", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["scene", "--bogus-flag", "--out", p(dir.path())]), 2);
}

fn live_counts(csv: &Path, k: usize) -> Vec<usize> {
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), k + 1);
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), k + 1);
            fields[..k].iter().filter(|f| **f != "-200.0000").count()
        })
        .collect()
}

#[test]
fn dataset_rows_and_top_n() {
    let dir = TempDir::new().unwrap();
    let (scene, dep) = scene_and_deployment(dir.path());
    let (top, full) = (dir.path().join("top"), dir.path().join("full"));
    let base = ["dataset", "--scene", p(&scene), "--deployment", p(&dep), "--rows", "20000", "--seed", "5"];
    ok(&[&base[..], &["--top-n", "10", "--out", p(&top)]].concat());
    ok(&[&base[..], &["--out", p(&full)]].concat());
    let header = fs::read_to_string(top.join("dataset.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("g_1,g_2,") && header.ends_with(",g_54,label"));
    let kept = live_counts(&top.join("dataset.csv"), 54);
    let above_floor = live_counts(&full.join("dataset.csv"), 54);
    assert_eq!(kept.len(), 20000);
    // Rows with at least 10 links above the floor keep exactly 10.
    for (k, a) in kept.iter().zip(&above_floor) {
        assert_eq!(*k, (*a).min(10));
    }
    assert!(above_floor.iter().filter(|&&a| a >= 10).count() > 15000);
    let meta = json(&top.join("dataset.meta.json"));
    assert_eq!((meta["K"].as_u64(), meta["N"].as_u64(), meta["L"].as_u64()), (Some(54), Some(10), Some(20000)));
    assert_eq!(meta["provenance"]["master_seed"], 5);
}

#[test]
fn single_row_dataset_and_n_bound() {
    let dir = TempDir::new().unwrap();
    let (scene, dep) = scene_and_deployment(dir.path());
    ok(&["dataset", "--scene", p(&scene), "--deployment", p(&dep), "--rows", "1", "--out", p(dir.path())]);
    assert_eq!(fs::read_to_string(dir.path().join("dataset.csv")).unwrap().lines().count(), 2);
    let too_many = ["dataset", "--scene", p(&scene), "--deployment", p(&dep), "--rows", "1", "--top-n", "55", "--out", p(dir.path())];
    assert_eq!(code(&too_many), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&["dataset", "--scene", p(&missing), "--deployment", p(&dep), "--rows", "1", "--out", p(dir.path())]), 3);
}

/// Train on one dataset, then score a second one drawn with another seed.
fn train_and_eval_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let (scene, dep) = scene_and_deployment(dir);
    let train_dir = dir.join("train");
    let val_dir = dir.join("val");
    ok(&["dataset", "--scene", p(&scene), "--deployment", p(&dep), "--rows", "1500", "--seed", "1", "--out", p(&train_dir)]);
    ok(&["dataset", "--scene", p(&scene), "--deployment", p(&dep), "--rows", "1500", "--seed", "2", "--out", p(&val_dir)]);
    ok(&["train", "--dataset", p(&train_dir.join("dataset.csv")), "--trees", "15", "--binarize", "street", "--out", p(&train_dir)]);
    (train_dir.join("model.json"), val_dir.join("dataset.csv"))
}

#[test]
fn train_then_eval_reports_scores() {
    let dir = TempDir::new().unwrap();
    let (model, val) = train_and_eval_fixture(dir.path());
    let out = dir.path().join("eval");
    ok(&["eval", "--model", p(&model), "--dataset", p(&val), "--binarize", "street", "--out", p(&out)]);
    let report = json(&out.join("report.json"));
    let per_class = report["scores"]["per_class"].as_object().unwrap();
    assert_eq!(per_class.keys().collect::<Vec<_>>(), vec!["0", "1"]);
    let support: u64 = per_class.values().map(|s| s["support"].as_u64().unwrap()).sum();
    assert_eq!(support, 1500);
    assert!(report["scores"]["macro_precision"].as_f64().unwrap() > 0.5);
    assert!(report["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    let model_json = json(&model);
    assert_eq!(model_json["provenance"]["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn zero_sigma_equals_no_flag() {
    let dir = TempDir::new().unwrap();
    let (model, val) = train_and_eval_fixture(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["eval", "--model", p(&model), "--dataset", p(&val), "--binarize", "street", "--out", p(&a)]);
    ok(&["eval", "--model", p(&model), "--dataset", p(&val), "--binarize", "street", "--sigma-db", "0", "--out", p(&b)]);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    let c = dir.path().join("c");
    ok(&["eval", "--model", p(&model), "--dataset", p(&val), "--binarize", "street", "--sigma-db", "3", "--out", p(&c)]);
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());
}

#[test]
fn width_mismatch_and_missing_model() {
    let dir = TempDir::new().unwrap();
    let (model, _) = train_and_eval_fixture(dir.path());
    let scene = dir.path().join("scene.json");
    let low = dir.path().join("low");
    ok(&["deploy", "--scene", p(&scene), "--preset", "london-low", "--out", p(&low)]);
    ok(&["dataset", "--scene", p(&scene), "--deployment", p(&low.join("deployment.json")), "--rows", "50", "--out", p(&low)]);
    let narrow = low.join("dataset.csv");
    assert_eq!(code(&["eval", "--model", p(&model), "--dataset", p(&narrow), "--out", p(&low)]), 2);
    let nowhere = dir.path().join("none.json");
    assert_eq!(code(&["eval", "--model", p(&nowhere), "--dataset", p(&narrow), "--out", p(&low)]), 3);
    fs::write(dir.path().join("broken.json"), "{\"format\":1,").unwrap();
    assert_eq!(code(&["eval", "--model", p(&dir.path().join("broken.json")), "--dataset", p(&narrow), "--out", p(&low)]), 2);
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let config = serde_json::json!({
        "master_seed": 11,
        "scene": {"preset": "london-like"},
        "deployment": {"preset": "london-low"},
        "dataset": {"train_rows": 400, "val_rows": 300, "task": {"binary": {"target": "forest"}}},
        "forest": {"n_trees": 5}
    });
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn sweep_csv_row_count() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("sweep");
    ok(&["sweep", "--config", p(&config), "--n-values", "2,5,10,20", "--sigma-values", "0,1", "--replicates", "5", "--out", p(&out)]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,sigma_db,replicate,metric,value"));
    let rows: Vec<&str> = lines.collect();
    // 2 sigma values × 4 N values × 5 replicates × {precision, recall}.
    assert_eq!(rows.len(), 2 * 4 * 5 * 2);
    let sweep = json(&out.join("sweep.json"));
    for series in sweep["series"].as_object().unwrap().values() {
        assert_eq!(series.as_array().unwrap().len(), 4);
    }
    assert_eq!(code(&["sweep", "--config", p(&config), "--n-values", "21", "--replicates", "1", "--out", p(&out)]), 2);
}

#[test]
fn pipeline_artifacts_carry_provenance() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("run");
    ok(&["pipeline", "--config", p(&config), "--out", p(&out)]);
    let manifest = json(&out.join("manifest.json"));
    let artifacts = manifest["artifacts"].as_object().unwrap();
    for name in ["scene.json", "deployment.json", "train.csv", "train.meta.json", "val.csv", "val.meta.json", "model.json", "report.json"] {
        let bytes = fs::read(out.join(name)).unwrap();
        assert_eq!(artifacts[name]["sha256"], landsense_core::artifact::sha256_hex(&bytes), "{name}");
    }
    let hash = json(&out.join("report.json"))["provenance"]["config_hash"].clone();
    for name in ["scene.json", "deployment.json", "train.meta.json", "val.meta.json", "model.json"] {
        let prov = &json(&out.join(name))["provenance"];
        assert_eq!(prov["config_hash"], hash, "{name}");
        assert_eq!(prov["master_seed"], 11, "{name}");
    }
    let seeded = dir.path().join("seeded");
    ok(&["pipeline", "--config", p(&config), "--seed", "12", "--out", p(&seeded)]);
    assert_eq!(json(&seeded.join("report.json"))["provenance"]["master_seed"], 12);
}

#[test]
fn missing_config_and_bad_thread_count() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&["pipeline", "--config", p(&missing), "--out", p(dir.path())]), 3);
    let config = small_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_landsense"))
        .args(["pipeline", "--config", p(&config), "--out", p(dir.path())])
        .env("LANDSENSE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
