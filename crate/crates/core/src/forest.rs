//! Random forest classifier: CART trees grown on Gini impurity, bootstrap
//! bagging, per-node feature subsampling and plurality voting.
//!
//! Split selection compares candidates in exact integer arithmetic, so ties
//! are real ties and the (lower feature, lower threshold) tie-break is
//! deterministic across platforms.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeds;

const MODEL_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRule {
    /// `floor(sqrt(K))`, at least 1.
    Sqrt,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeaturesPerSplit {
    Count(usize),
    Rule(FeatureRule),
}

impl FeaturesPerSplit {
    pub fn resolve(self, k: usize) -> Result<usize> {
        let m = match self {
            FeaturesPerSplit::Count(m) => m,
            FeaturesPerSplit::Rule(FeatureRule::Sqrt) => ((k as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::Rule(FeatureRule::All) => k,
        };
        if m == 0 || m > k {
            return Err(Error::InvalidParams(format!("features_per_split {m} outside [1, {k}]")));
        }
        Ok(m)
    }
}

impl std::str::FromStr for FeaturesPerSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Self::Rule(FeatureRule::Sqrt)),
            "all" => Ok(Self::Rule(FeatureRule::All)),
            n => n
                .parse()
                .map(Self::Count)
                .map_err(|_| Error::InvalidParams(format!("features_per_split `{n}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::Rule(FeatureRule::Sqrt),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParams("min_samples_split must be >= 2".into()));
        }
        self.features_per_split.resolve(k)?;
        Ok(())
    }
}

/// Column-major feature matrix with labels mapped to dense class indices.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    columns: Vec<Vec<f64>>,
    targets: Vec<u16>,
    classes: Vec<u32>,
}

impl TrainingSet {
    pub fn new(rows: &[Vec<f64>], labels: &[u32]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput("row and label counts differ".into()));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidInput("rows have no features".into()));
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); k];
        for row in rows {
            if row.len() != k {
                return Err(Error::InvalidFeatures { expected: k, got: row.len() });
            }
            if row.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidInput("NaN feature".into()));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() > u16::MAX as usize {
            return Err(Error::InvalidInput("too many classes".into()));
        }
        let targets = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label collected") as u16)
            .collect();
        Ok(Self { columns, targets, classes })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let rows: Vec<Vec<f64>> = ds.rows.iter().map(|r| r.features_db.clone()).collect();
        Self::new(&rows, &ds.labels())
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn label(&self, row: usize) -> u32 {
        self.classes[self.targets[row] as usize]
    }

    fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.classes.len()];
        for &r in rows {
            counts[self.targets[r] as usize] += 1;
        }
        counts
    }
}

/// `1 − Σ p_c²` over the given class counts.
pub fn gini_impurity(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidNode);
    }
    let t = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    pub weighted_impurity: f64,
}

/// Midpoint of two distinct sorted values that still separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi { mid } else { lo }
}

/// Weighted child Gini is `1 − (S_L/n_L + S_R/n_R)/n` with `S = Σ c²`, so a
/// split is better exactly when `S_L/n_L + S_R/n_R` is larger. Kept as the
/// fraction `(S_L·n_R + S_R·n_L) / (n_L·n_R)` and compared by cross
/// multiplication.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn children(sum_sq_left: u64, n_left: u64, sum_sq_right: u64, n_right: u64) -> Self {
        Self {
            num: sum_sq_left as u128 * n_right as u128 + sum_sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn parent(sum_sq: u64, n: u64) -> Self {
        Self { num: sum_sq as u128, den: n as u128 }
    }

    fn beats(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }

    fn weighted_gini(self, n: u64) -> f64 {
        1.0 - (self.num as f64 / self.den as f64) / n as f64
    }
}

/// Reusable buffers for split search.
struct Splitter {
    sorted: Vec<(f64, u16)>,
    left: Vec<u64>,
    right: Vec<u64>,
}

impl Splitter {
    fn new(n_classes: usize) -> Self {
        Self { sorted: Vec::new(), left: vec![0; n_classes], right: vec![0; n_classes] }
    }

    /// `features` must be ascending so the first strictly-best candidate wins
    /// ties on feature index; thresholds are scanned in ascending order.
    fn best(&mut self, data: &TrainingSet, rows: &[usize], features: &[usize], counts: &[u64]) -> Option<Split> {
        let n = rows.len() as u64;
        let sum_sq: u64 = counts.iter().map(|c| c * c).sum();
        let parent = Purity::parent(sum_sq, n);
        let mut best: Option<(Purity, usize, f64)> = None;

        for &f in features {
            let column = &data.columns[f];
            self.sorted.clear();
            self.sorted.extend(rows.iter().map(|&r| (column[r], data.targets[r])));
            self.sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.sorted[0].0 == self.sorted[self.sorted.len() - 1].0 {
                continue;
            }
            self.left.iter_mut().for_each(|c| *c = 0);
            self.right.copy_from_slice(counts);
            let (mut sq_left, mut sq_right) = (0u64, sum_sq);
            for i in 0..self.sorted.len() - 1 {
                let c = self.sorted[i].1 as usize;
                sq_left += 2 * self.left[c] + 1;
                self.left[c] += 1;
                sq_right -= 2 * self.right[c] - 1;
                self.right[c] -= 1;
                let (v, next) = (self.sorted[i].0, self.sorted[i + 1].0);
                if v == next {
                    continue;
                }
                let n_left = i as u64 + 1;
                let cand = Purity::children(sq_left, n_left, sq_right, n - n_left);
                if !cand.beats(parent) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _, _)| cand.beats(*b)) {
                    best = Some((cand, f, midpoint(v, next)));
                }
            }
        }
        best.map(|(p, feature, threshold)| Split { feature, threshold, weighted_impurity: p.weighted_gini(n) })
    }
}

/// Best Gini split of `rows` over `features`, or `None` when no threshold
/// lowers the impurity. Candidate thresholds are midpoints between
/// consecutive distinct values; ties go to the lower feature index, then the
/// lower threshold.
pub fn best_split(data: &TrainingSet, rows: &[usize], features: &[usize]) -> Option<Split> {
    if rows.is_empty() || features.is_empty() {
        return None;
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let counts = data.class_counts(rows);
    Splitter::new(data.classes.len()).best(data, rows, &features, &counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Training rows per class index that reached this leaf.
    Leaf { counts: Vec<u64> },
}

/// Flat node array, root at index 0. Children always sit after their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    /// Index of the leaf that `features` lands in.
    pub fn leaf_index(&self, features: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if features[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Majority class index of the reached leaf; ties go to the lower index.
    pub fn predict_index(&self, features: &[f64]) -> usize {
        match &self.nodes[self.leaf_index(features)] {
            Node::Leaf { counts } => argmax_lowest(counts),
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    fn check(&self, k: usize, n_classes: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::DecodeFailure(m.to_string()));
        if self.nodes.is_empty() {
            return bad("tree without nodes");
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    if *feature >= k || threshold.is_nan() {
                        return bad("split references a missing feature");
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return bad("child index out of order");
                        }
                        parents[c] += 1;
                    }
                }
                Node::Leaf { counts } => {
                    if counts.len() != n_classes || counts.iter().all(|&c| c == 0) {
                        return bad("leaf counts do not match the class list");
                    }
                }
            }
        }
        // Every non-root node has exactly one parent: the tree is connected.
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes are not a single tree");
        }
        Ok(())
    }
}

/// Grows one CART tree over `rows` (indices into `data`, duplicates allowed).
pub fn train_tree(data: &TrainingSet, rows: &[usize], params: &ForestParams, rng: &mut ChaCha8Rng) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot grow a tree on zero rows".into()));
    }
    let k = data.n_features();
    params.validate(k)?;
    let m = params.features_per_split.resolve(k)?;
    let mut rows = rows.to_vec();
    let mut splitter = Splitter::new(data.classes.len());
    let mut nodes = vec![Node::Leaf { counts: Vec::new() }];
    // (node slot, row range, depth); left children are popped first.
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];

    while let Some((slot, start, end, depth)) = stack.pop() {
        let node_rows = &mut rows[start..end];
        let counts = data.class_counts(node_rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let stop = pure
            || params.max_depth.is_some_and(|d| depth >= d)
            || node_rows.len() < params.min_samples_split;
        let split = if stop {
            None
        } else {
            let mut features = index::sample(rng, k, m).into_vec();
            features.sort_unstable();
            splitter.best(data, node_rows, &features, &counts)
        };
        let Some(split) = split else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        let column = &data.columns[split.feature];
        let mut mid = 0;
        for i in 0..node_rows.len() {
            if column[node_rows[i]] <= split.threshold {
                node_rows.swap(i, mid);
                mid += 1;
            }
        }
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[slot] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        stack.push((right, start + mid, end, depth + 1));
        stack.push((left, start, start + mid, depth + 1));
    }
    Ok(DecisionTree { nodes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub k: usize,
    /// Sorted class codes; leaf counts are indexed by position in this list.
    pub classes: Vec<u32>,
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: u32,
    /// Trees voting for each class.
    pub vote_counts: BTreeMap<u32, usize>,
    /// `vote_counts / n_trees`.
    pub votes: BTreeMap<u32, f64>,
}

pub fn train_forest(ds: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
    }
    train_forest_on(&TrainingSet::from_dataset(ds)?, params)
}

/// Trains `n_trees` trees in parallel. Tree `t` draws its bootstrap sample
/// and feature subsets from stream `(seed, t)`.
pub fn train_forest_on(data: &TrainingSet, params: &ForestParams) -> Result<ForestModel> {
    params.validate(data.n_features())?;
    let l = data.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::stream(params.seed, seeds::TREE, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..l).map(|_| rng.random_range(0..l)).collect()
            } else {
                (0..l).collect()
            };
            train_tree(data, &rows, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, params: params.clone(), k: data.n_features(), classes: data.classes.clone(), provenance: None })
}

impl ForestModel {
    fn check_width(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.k {
            return Err(Error::InvalidFeatures { expected: self.k, got: features.len() });
        }
        Ok(())
    }

    /// Class code each tree votes for.
    pub fn tree_predictions(&self, features: &[f64]) -> Result<Vec<u32>> {
        self.check_width(features)?;
        Ok(self.trees.iter().map(|t| self.classes[t.predict_index(features)]).collect())
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        self.check_width(features)?;
        let mut tally = vec![0usize; self.classes.len()];
        for t in &self.trees {
            tally[t.predict_index(features)] += 1;
        }
        let n = self.trees.len() as f64;
        let class = self.classes[argmax_lowest(&tally)];
        let vote_counts: BTreeMap<u32, usize> =
            self.classes.iter().zip(&tally).filter(|(_, &c)| c > 0).map(|(&k, &c)| (k, c)).collect();
        let votes = vote_counts.iter().map(|(&k, &c)| (k, c as f64 / n)).collect();
        Ok(Prediction { class, vote_counts, votes })
    }

    pub fn predict_class(&self, features: &[f64]) -> Result<u32> {
        self.predict(features).map(|p| p.class)
    }

    /// Predicted class for every row, evaluated in parallel.
    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        rows.par_iter().map(|r| self.predict_class(r)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let file = ModelFile {
            format: MODEL_FORMAT,
            k: self.k,
            classes: self.classes.clone(),
            params: self.params.clone(),
            provenance: self.provenance.clone(),
            trees: self.trees.iter().map(|t| t.nodes.clone()).collect(),
        };
        Ok(serde_json::to_vec(&file)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::DecodeFailure("empty payload".into()));
        }
        let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| Error::DecodeFailure(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::DecodeFailure(format!("unsupported model format {}", file.format)));
        }
        if file.trees.len() != file.params.n_trees {
            return Err(Error::DecodeFailure("tree count disagrees with n_trees".into()));
        }
        if file.classes.is_empty() || file.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DecodeFailure("class list must be sorted and non-empty".into()));
        }
        let trees: Vec<DecisionTree> = file.trees.into_iter().map(|nodes| DecisionTree { nodes }).collect();
        for t in &trees {
            t.check(file.k, file.classes.len())?;
        }
        Ok(Self { trees, params: file.params, k: file.k, classes: file.classes, provenance: file.provenance })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    k: usize,
    classes: Vec<u32>,
    params: ForestParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    trees: Vec<Vec<Node>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::{prop, prop_assert_eq, proptest};
    use rand::SeedableRng;

    /// Weighted child Gini straight from the definition, in exact rationals.
    fn exact_weighted_gini(labels: &[u32], left: &[bool]) -> Ratio<i128> {
        let gini = |ls: Vec<u32>| -> Ratio<i128> {
            let n = ls.len() as i128;
            let mut classes = ls.clone();
            classes.sort();
            classes.dedup();
            let mut g = Ratio::from_integer(1);
            for c in classes {
                let p = Ratio::new(ls.iter().filter(|&&l| l == c).count() as i128, n);
                g -= p * p;
            }
            g
        };
        let n = labels.len() as i128;
        let l: Vec<u32> = labels.iter().zip(left).filter(|(_, &s)| s).map(|(&y, _)| y).collect();
        let r: Vec<u32> = labels.iter().zip(left).filter(|(_, &s)| !s).map(|(&y, _)| y).collect();
        Ratio::new(l.len() as i128, n) * gini(l) + Ratio::new(r.len() as i128, n) * gini(r)
    }

    /// Exhaustive search over every (feature, midpoint) pair.
    fn oracle(rows: &[Vec<f64>], labels: &[u32], features: &[usize]) -> Option<(usize, f64)> {
        let all_left = vec![true; labels.len()];
        let parent = exact_weighted_gini(labels, &all_left);
        let mut best: Option<(Ratio<i128>, usize, f64)> = None;
        let mut features = features.to_vec();
        features.sort();
        for f in features {
            let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = midpoint(w[0], w[1]);
                let side: Vec<bool> = rows.iter().map(|r| r[f] <= t).collect();
                let g = exact_weighted_gini(labels, &side);
                if g < parent && best.as_ref().is_none_or(|(b, _, _)| g < *b) {
                    best = Some((g, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[4]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[2, 2]).unwrap(), 0.5);
        assert!((gini_impurity(&[1, 1, 2]).unwrap() - 0.625).abs() < 1e-15);
        assert!(matches!(gini_impurity(&[]), Err(Error::InvalidNode)));
        assert!(matches!(gini_impurity(&[0, 0]), Err(Error::InvalidNode)));
    }

    #[test]
    fn separable_pair_splits_at_midpoint() {
        let data = TrainingSet::new(&[vec![-90.0], vec![-70.0]], &[0, 1]).unwrap();
        let s = best_split(&data, &[0, 1], &[0]).unwrap();
        assert_eq!((s.feature, s.threshold, s.weighted_impurity), (0, -80.0, 0.0));
    }

    #[test]
    fn identical_rows_do_not_split() {
        let data = TrainingSet::new(&vec![vec![1.0, 2.0]; 6], &[0, 1, 0, 1, 1, 0]).unwrap();
        assert!(best_split(&data, &[0, 1, 2, 3, 4, 5], &[0, 1]).is_none());
    }

    proptest! {
        #[test]
        fn split_matches_exhaustive_search(
            raw in prop::collection::vec((prop::collection::vec(0i32..6, 3), 0u32..3), 2..50),
            n_features in 1usize..=3,
        ) {
            let rows: Vec<Vec<f64>> = raw.iter().map(|(v, _)| v[..n_features].iter().map(|&x| x as f64 * -10.0).collect()).collect();
            let labels: Vec<u32> = raw.iter().map(|(_, y)| *y).collect();
            let data = TrainingSet::new(&rows, &labels).unwrap();
            let idx: Vec<usize> = (0..rows.len()).collect();
            let features: Vec<usize> = (0..n_features).collect();
            let got = best_split(&data, &idx, &features).map(|s| (s.feature, s.threshold));
            prop_assert_eq!(got, oracle(&rows, &labels, &features));
        }
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 3) as u32;
            let center = -60.0 - 15.0 * y as f64;
            rows.push((0..4).map(|j| center + j as f64 + rng.random_range(-8.0..8.0)).collect());
            labels.push(y * 4);
        }
        (rows, labels)
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let data = TrainingSet::new(&[vec![1.0], vec![2.0], vec![3.0]], &[11, 11, 11]).unwrap();
        let tree = train_tree(&data, &[0, 1, 2], &ForestParams::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { counts: vec![3] }]);
    }

    #[test]
    fn zero_depth_gives_root_leaf() {
        let (rows, labels) = blobs(30, 1);
        let data = TrainingSet::new(&rows, &labels).unwrap();
        let params = ForestParams { max_depth: Some(0), ..Default::default() };
        let idx: Vec<usize> = (0..30).collect();
        let tree = train_tree(&data, &idx, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { counts: vec![10, 10, 10] }]);
    }

    #[test]
    fn deep_tree_fits_its_bootstrap() {
        let (rows, labels) = blobs(300, 2);
        let data = TrainingSet::new(&rows, &labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample: Vec<usize> = (0..300).map(|_| rng.random_range(0..300)).collect();
        let params = ForestParams { features_per_split: FeaturesPerSplit::Rule(FeatureRule::All), ..Default::default() };
        let tree = train_tree(&data, &sample, &params, &mut rng).unwrap();
        for &r in &sample {
            let x: Vec<f64> = (0..4).map(|f| data.value(r, f)).collect();
            assert_eq!(data.classes()[tree.predict_index(&x)], data.label(r));
        }
        // Leaf partition: leaf counts add up to the sample histogram.
        let mut leaf_total = vec![0u64; 3];
        for node in &tree.nodes {
            if let Node::Leaf { counts } = node {
                leaf_total.iter_mut().zip(counts).for_each(|(a, b)| *a += b);
            }
        }
        assert_eq!(leaf_total, data.class_counts(&sample));
        tree.check(4, 3).unwrap();
    }

    #[test]
    fn single_tree_forest_equals_its_tree() {
        let (rows, labels) = blobs(90, 4);
        let data = TrainingSet::new(&rows, &labels).unwrap();
        let params = ForestParams { n_trees: 1, bootstrap: false, seed: 8, ..Default::default() };
        let model = train_forest_on(&data, &params).unwrap();
        let idx: Vec<usize> = (0..90).collect();
        let tree = train_tree(&data, &idx, &params, &mut seeds::stream(8, seeds::TREE, 0)).unwrap();
        assert_eq!(model.trees[0], tree);
        let (probe, _) = blobs(50, 5);
        for x in &probe {
            assert_eq!(model.predict_class(x).unwrap(), data.classes()[tree.predict_index(x)]);
        }
    }

    #[test]
    fn votes_and_mode() {
        let (rows, labels) = blobs(150, 6);
        let data = TrainingSet::new(&rows, &labels).unwrap();
        let model = train_forest_on(&data, &ForestParams { n_trees: 15, seed: 1, ..Default::default() }).unwrap();
        let (probe, _) = blobs(60, 7);
        for x in &probe {
            let p = model.predict(x).unwrap();
            assert_eq!(p.vote_counts.values().sum::<usize>(), 15);
            let per_tree = model.tree_predictions(x).unwrap();
            let mut tally: BTreeMap<u32, usize> = BTreeMap::new();
            for c in per_tree {
                *tally.entry(c).or_default() += 1;
            }
            let top = *tally.values().max().unwrap();
            let mode = *tally.iter().find(|(_, &v)| v == top).unwrap().0;
            assert_eq!(p.class, mode);
            assert_eq!(tally, p.vote_counts);
        }
        assert!(matches!(model.predict(&[0.0; 3]), Err(Error::InvalidFeatures { expected: 4, got: 3 })));
    }

    #[test]
    fn pure_leaf_forest_votes_unanimously() {
        let data = TrainingSet::new(&vec![vec![-70.0, -80.0]; 4], &[11; 4]).unwrap();
        let model = train_forest_on(&data, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        let p = model.predict(&[-1.0, -2.0]).unwrap();
        assert_eq!(p.class, 11);
        assert_eq!(p.votes, BTreeMap::from([(11, 1.0)]));
    }

    #[test]
    fn serialization_round_trip() {
        let (rows, labels) = blobs(120, 9);
        let data = TrainingSet::new(&rows, &labels).unwrap();
        let model = train_forest_on(&data, &ForestParams { n_trees: 7, seed: 2, ..Default::default() }).unwrap();
        let bytes = model.to_bytes().unwrap();
        let back = ForestModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        let (probe, _) = blobs(100, 10);
        for x in &probe {
            assert_eq!(back.predict(x).unwrap(), model.predict(x).unwrap());
        }
        assert_eq!(bytes, train_forest_on(&data, &ForestParams { n_trees: 7, seed: 2, ..Default::default() }).unwrap().to_bytes().unwrap());
        assert!(matches!(ForestModel::from_bytes(&bytes[..bytes.len() / 2]), Err(Error::DecodeFailure(_))));
        assert!(matches!(ForestModel::from_bytes(b""), Err(Error::DecodeFailure(_))));
        let text = String::from_utf8(bytes).unwrap().replacen("\"format\":1", "\"format\":9", 1);
        assert!(matches!(ForestModel::from_bytes(text.as_bytes()), Err(Error::DecodeFailure(_))));
    }

    #[test]
    fn param_validation() {
        assert!(ForestParams { n_trees: 0, ..Default::default() }.validate(4).is_err());
        assert!(ForestParams { min_samples_split: 1, ..Default::default() }.validate(4).is_err());
        assert!(ForestParams { features_per_split: FeaturesPerSplit::Count(5), ..Default::default() }.validate(4).is_err());
        assert_eq!(FeaturesPerSplit::Rule(FeatureRule::Sqrt).resolve(54).unwrap(), 7);
        assert_eq!(FeaturesPerSplit::Rule(FeatureRule::Sqrt).resolve(1).unwrap(), 1);
        let json = serde_json::to_string(&ForestParams::default()).unwrap();
        assert!(json.contains("\"features_per_split\":\"sqrt\""));
        assert_eq!(serde_json::from_str::<ForestParams>(&json).unwrap(), ForestParams::default());
        let fixed: ForestParams = serde_json::from_str(r#"{"features_per_split": 3}"#).unwrap();
        assert_eq!(fixed.features_per_split, FeaturesPerSplit::Count(3));
    }
}
