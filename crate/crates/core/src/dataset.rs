//! Training/validation sets built from path-gain vectors.
//!
//! Each row keeps the `N` strongest gains of a UE (the rest are pushed to a
//! sentinel floor) together with the landscape code of the drop.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::propagation::{path_gain_vector, PathGainVector, PropagationParams};
use crate::scene::{Deployment, LandscapeCategory, SceneMap, UEDrop};
use crate::seeds;

/// Masked ("zeroed out") entries carry this value unless configured otherwise.
pub const DEFAULT_SENTINEL_DB: f64 = -200.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub features_db: Vec<f64>,
    pub label: u32,
    /// Fewer than `N` links rose above the sentinel.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RebalanceMode {
    Undersample,
    Oversample,
}

impl std::str::FromStr for RebalanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undersample" => Ok(Self::Undersample),
            "oversample" => Ok(Self::Oversample),
            other => Err(Error::InvalidParams(format!("unknown rebalance mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: Vec<TrainingRow>,
    pub k: usize,
    pub n: usize,
    pub layer_name: String,
    pub seed: u64,
    pub sentinel_db: f64,
    /// Combined standard deviation of all perturbation noise applied so far.
    pub sigma_db: f64,
    pub rebalanced: Option<RebalanceMode>,
    /// Set once labels have been mapped to 1/0 for this category.
    pub binarized_for: Option<LandscapeCategory>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn label_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    fn with_rows(&self, rows: Vec<TrainingRow>) -> Self {
        Self { rows, ..self.clone_meta() }
    }

    fn clone_meta(&self) -> Self {
        Self {
            rows: Vec::new(),
            k: self.k,
            n: self.n,
            layer_name: self.layer_name.clone(),
            seed: self.seed,
            sentinel_db: self.sentinel_db,
            sigma_db: self.sigma_db,
            rebalanced: self.rebalanced,
            binarized_for: self.binarized_for,
        }
    }

    /// Assembles a dataset from raw gain vectors by applying the top-N
    /// selector to each.
    pub fn from_gains(
        gains: &[PathGainVector],
        labels: &[u32],
        n: usize,
        sentinel_db: f64,
        layer_name: &str,
        seed: u64,
    ) -> Result<Self> {
        if gains.len() != labels.len() {
            return Err(Error::InvalidInput("gain and label counts differ".into()));
        }
        let k = gains.first().map_or(0, |g| g.gains_db.len());
        let rows = gains
            .iter()
            .zip(labels)
            .map(|(g, &label)| {
                if g.gains_db.len() != k {
                    return Err(Error::InvalidInput("gain vectors differ in width".into()));
                }
                let features_db = select_top_n(&g.gains_db, n, sentinel_db)?;
                let live = features_db.iter().filter(|&&v| v > sentinel_db).count();
                Ok(TrainingRow { features_db, label, degenerate: live < n })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            k,
            n,
            layer_name: layer_name.to_string(),
            seed,
            sentinel_db,
            sigma_db: 0.0,
            rebalanced: None,
            binarized_for: None,
        })
    }

    pub fn metadata(&self, provenance: Option<&Provenance>) -> DatasetMeta {
        DatasetMeta {
            format: 1,
            k: self.k,
            n: self.n,
            l: self.len(),
            layer_name: self.layer_name.clone(),
            seed: self.seed,
            sigma_db: self.sigma_db,
            rebalanced: self.rebalanced,
            sentinel_db: self.sentinel_db,
            binarized_for: self.binarized_for,
            provenance: provenance.cloned(),
        }
    }

    /// `g_1,...,g_K,label` with four decimals per gain.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.k).map(|i| format!("g_{i}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for v in &row.features_db {
                use std::fmt::Write as _;
                write!(line, "{v:.4},").expect("write to String");
            }
            writeln!(out, "{line}{}", row.label)?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]; the sidecar supplies
    /// `N`, the sentinel and provenance.
    pub fn read_csv<R: BufRead>(input: R, meta: &DatasetMeta) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let columns: Vec<&str> = header.trim().split(',').collect();
        let k = columns.len().saturating_sub(1);
        let expected: Vec<String> = (1..=k).map(|i| format!("g_{i}")).chain(["label".into()]).collect();
        if columns != expected {
            return Err(Error::Format("dataset header must be g_1..g_K,label".into()));
        }
        if k != meta.k {
            return Err(Error::Format(format!("header has K={k}, sidecar says {}", meta.k)));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != k + 1 {
                return Err(Error::Format(format!("row {} has {} fields", lineno + 1, fields.len())));
            }
            let bad = |_| Error::Format(format!("unparsable value on row {}", lineno + 1));
            let features_db = fields[..k].iter().map(|f| f.parse::<f64>().map_err(bad)).collect::<Result<Vec<_>>>()?;
            let label = fields[k].parse::<u32>().map_err(|_| Error::Format(format!("bad label on row {}", lineno + 1)))?;
            let live = features_db.iter().filter(|&&v| v > meta.sentinel_db).count();
            rows.push(TrainingRow { features_db, label, degenerate: live < meta.n });
        }
        if rows.len() != meta.l {
            return Err(Error::Format(format!("sidecar says L={}, file holds {}", meta.l, rows.len())));
        }
        Ok(Self {
            rows,
            k,
            n: meta.n,
            layer_name: meta.layer_name.clone(),
            seed: meta.seed,
            sentinel_db: meta.sentinel_db,
            sigma_db: meta.sigma_db,
            rebalanced: meta.rebalanced,
            binarized_for: meta.binarized_for,
        })
    }
}

/// JSON sidecar written next to every dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: u32,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub layer_name: String,
    pub seed: u64,
    pub sigma_db: f64,
    pub rebalanced: Option<RebalanceMode>,
    pub sentinel_db: f64,
    #[serde(default)]
    pub binarized_for: Option<LandscapeCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Keeps the `n` largest gains in place and sets every other entry to
/// `sentinel`. Ties at the cut-off go to the lower station index.
pub fn select_top_n(gains_db: &[f64], n: usize, sentinel: f64) -> Result<Vec<f64>> {
    let k = gains_db.len();
    if n == 0 || n > k {
        return Err(Error::InvalidN { n, k });
    }
    if n == k {
        return Ok(gains_db.to_vec());
    }
    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort: equal gains keep index order.
    order.sort_by(|&a, &b| gains_db[b].total_cmp(&gains_db[a]));
    let mut out = vec![sentinel; k];
    for &i in &order[..n] {
        out[i] = gains_db[i];
    }
    Ok(out)
}

/// Raw (unmasked) gain vectors for each drop. Drop `i` draws its shadowing
/// from stream `(shadow_seed, i)`, so the result does not depend on thread
/// scheduling.
pub fn compute_gains(
    scene: &SceneMap,
    deployment: &Deployment,
    drops: &[UEDrop],
    params: &PropagationParams,
    shadow_seed: u64,
) -> Result<Vec<PathGainVector>> {
    params.validate()?;
    drops
        .par_iter()
        .enumerate()
        .map(|(i, drop)| {
            let mut rng = seeds::stream(shadow_seed, seeds::SHADOW, i as u64);
            path_gain_vector(scene, deployment, drop, params, &mut rng)
        })
        .collect()
}

/// One row per drop: top-N masked gains plus the drop's category code.
pub fn build_dataset(
    scene: &SceneMap,
    deployment: &Deployment,
    drops: &[UEDrop],
    n: usize,
    params: &PropagationParams,
    master_seed: u64,
) -> Result<Dataset> {
    if drops.is_empty() {
        return Err(Error::InvalidInput("no UE drops".into()));
    }
    let k = deployment.k();
    if n == 0 || n > k {
        return Err(Error::InvalidN { n, k });
    }
    let gains = compute_gains(scene, deployment, drops, params, master_seed)?;
    let labels: Vec<u32> = drops.iter().map(|d| d.category.code()).collect();
    Dataset::from_gains(&gains, &labels, n, params.min_gain_db, &deployment.layer_name, master_seed)
}

/// One-vs-rest labels: 1 where the row's category is `target`, else 0.
pub fn binarize_labels(ds: &Dataset, target: u32) -> Result<Dataset> {
    let cat = LandscapeCategory::from_code(target).ok_or(Error::InvalidCategory(target))?;
    if let Some(already) = ds.binarized_for {
        // Re-binarizing for the same category leaves the labels alone.
        if already == cat {
            return Ok(ds.clone());
        }
        return Err(Error::InvalidInput(format!("labels are already binarized for {already}")));
    }
    let rows = ds
        .rows
        .iter()
        .map(|r| TrainingRow { label: u32::from(r.label == target), ..r.clone() })
        .collect();
    let mut out = ds.with_rows(rows);
    out.binarized_for = Some(cat);
    Ok(out)
}

/// Keeps the listed categories and folds every other label into
/// `Other` (0), the "none of these" class.
pub fn restrict_labels(ds: &Dataset, keep: &[LandscapeCategory]) -> Result<Dataset> {
    if ds.binarized_for.is_some() {
        return Err(Error::InvalidInput("cannot restrict binarized labels".into()));
    }
    let keep: Vec<u32> = keep.iter().map(|c| c.code()).collect();
    let rows = ds
        .rows
        .iter()
        .map(|r| {
            let label = if keep.contains(&r.label) { r.label } else { LandscapeCategory::Other.code() };
            TrainingRow { label, ..r.clone() }
        })
        .collect();
    Ok(ds.with_rows(rows))
}

/// Equalizes class counts, then shuffles. Undersampling draws every class
/// down to the minority count without replacement; oversampling keeps every
/// row and tops each class up to the majority count with replacement.
pub fn rebalance(ds: &Dataset, mode: RebalanceMode, seed: u64) -> Result<Dataset> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.rows.iter().enumerate() {
        by_class.entry(r.label).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::NothingToBalance);
    }
    let min = by_class.values().map(Vec::len).min().expect("non-empty");
    let max = by_class.values().map(Vec::len).max().expect("non-empty");
    let mut rng = seeds::stream(seed, seeds::REBALANCE, 0);
    let mut picked: Vec<usize> = Vec::new();
    for members in by_class.values() {
        match mode {
            RebalanceMode::Undersample => {
                picked.extend(index::sample(&mut rng, members.len(), min).into_iter().map(|j| members[j]));
            }
            RebalanceMode::Oversample => {
                picked.extend(members);
                picked.extend((members.len()..max).map(|_| members[rng.random_range(0..members.len())]));
            }
        }
    }
    picked.shuffle(&mut rng);
    let mut out = ds.with_rows(picked.into_iter().map(|i| ds.rows[i].clone()).collect());
    out.rebalanced = Some(mode);
    Ok(out)
}

/// Adds i.i.d. N(0, σ²) dB noise to every live feature; sentinel entries
/// and labels are left alone. Row `i` uses its own stream.
pub fn perturb(ds: &Dataset, sigma_db: f64, seed: u64) -> Result<Dataset> {
    if !(sigma_db >= 0.0) {
        return Err(Error::InvalidParams("sigma_db must be >= 0".into()));
    }
    if sigma_db == 0.0 {
        return Ok(ds.clone());
    }
    let sentinel = ds.sentinel_db;
    let rows = ds
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = seeds::stream(seed, seeds::PERTURB, i as u64);
            let features_db = r
                .features_db
                .iter()
                .map(|&v| {
                    if v == sentinel {
                        v
                    } else {
                        let z: f64 = rng.sample(StandardNormal);
                        v + sigma_db * z
                    }
                })
                .collect();
            TrainingRow { features_db, ..r.clone() }
        })
        .collect();
    let mut out = ds.with_rows(rows);
    out.sigma_db = ds.sigma_db.hypot(sigma_db);
    Ok(out)
}

/// Noise on raw gain vectors, for perturbing before the top-N selection.
pub fn perturb_gains(gains: &[PathGainVector], sigma_db: f64, sentinel: f64, seed: u64) -> Vec<PathGainVector> {
    gains
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = seeds::stream(seed, seeds::PERTURB, i as u64);
            let gains_db = g
                .gains_db
                .iter()
                .map(|&v| {
                    let z: f64 = rng.sample(StandardNormal);
                    if v == sentinel { v } else { (v + sigma_db * z).max(sentinel) }
                })
                .collect();
            PathGainVector { gains_db }
        })
        .collect()
}

/// Disjoint shuffled partition; `train_fraction` of the rows (rounded) go
/// to the first part.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!("fraction {train_fraction} not in (0, 1)")));
    }
    let l = ds.len();
    let n_train = (train_fraction * l as f64).round() as usize;
    if n_train == 0 || n_train == l {
        return Err(Error::InvalidSplit(format!("fraction {train_fraction} leaves an empty part of {l} rows")));
    }
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut seeds::stream(seed, seeds::SPLIT, 0));
    let take = |idx: &[usize]| ds.with_rows(idx.iter().map(|&i| ds.rows[i].clone()).collect());
    Ok((take(&order[..n_train]), take(&order[n_train..])))
}
