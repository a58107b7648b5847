//! Confusion matrices and the precision/recall scores derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod experiment;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Sorted class codes; row and column order of `counts`.
    pub classes: Vec<u32>,
    /// `counts[i][j]`: rows of true class `i` predicted as class `j`.
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(truths: &[u32], preds: &[u32], classes: &[u32]) -> Result<ConfusionMatrix> {
    if truths.len() != preds.len() {
        return Err(Error::InvalidInput(format!("{} truths but {} predictions", truths.len(), preds.len())));
    }
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let pos = |c: u32| classes.binary_search(&c).map_err(|_| Error::InvalidClass(c));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in truths.iter().zip(preds) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// A precision or recall value. When the denominator is zero the score is
/// undefined; it is then reported as 0 with `degenerate` set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Self { value: 0.0, degenerate: true }
        } else {
            Self { value: num as f64 / den as f64, degenerate: false }
        }
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn index(&self, class: u32) -> Result<usize> {
        self.classes.binary_search(&class).map_err(|_| Error::InvalidClass(class))
    }

    pub fn true_positives(&self, class: u32) -> Result<u64> {
        let i = self.index(class)?;
        Ok(self.counts[i][i])
    }

    pub fn false_positives(&self, class: u32) -> Result<u64> {
        let j = self.index(class)?;
        Ok(self.counts.iter().map(|row| row[j]).sum::<u64>() - self.counts[j][j])
    }

    pub fn false_negatives(&self, class: u32) -> Result<u64> {
        let i = self.index(class)?;
        Ok(self.counts[i].iter().sum::<u64>() - self.counts[i][i])
    }

    /// Rows whose true class is `class`.
    pub fn support(&self, class: u32) -> Result<u64> {
        let i = self.index(class)?;
        Ok(self.counts[i].iter().sum())
    }

    /// Overall fraction of rows on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total().max(1) as f64
    }
}

/// `tp / (tp + fp)`.
pub fn precision(cm: &ConfusionMatrix, class: u32) -> Result<Score> {
    let tp = cm.true_positives(class)?;
    Ok(Score::ratio(tp, tp + cm.false_positives(class)?))
}

/// `tp / (tp + fn)`.
pub fn recall(cm: &ConfusionMatrix, class: u32) -> Result<Score> {
    let tp = cm.true_positives(class)?;
    Ok(Score::ratio(tp, tp + cm.false_negatives(class)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_degenerate: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_class: BTreeMap<u32, ClassScores>,
    /// Classes the macro averages run over.
    pub macro_classes: Vec<u32>,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

/// Per-class scores for every class in `cm`, with unweighted means of
/// precision and recall over `include`.
pub fn macro_scores(cm: &ConfusionMatrix, include: &[u32]) -> Result<ScoreReport> {
    let mut include = include.to_vec();
    include.sort_unstable();
    include.dedup();
    if include.is_empty() {
        return Err(Error::InvalidInput("macro average over no classes".into()));
    }
    let mut per_class = BTreeMap::new();
    for &c in &cm.classes {
        let (p, r) = (precision(cm, c)?, recall(cm, c)?);
        per_class.insert(
            c,
            ClassScores {
                precision: p.value,
                recall: r.value,
                support: cm.support(c)?,
                precision_degenerate: p.degenerate,
                recall_degenerate: r.degenerate,
            },
        );
    }
    let mut sum_p = 0.0;
    let mut sum_r = 0.0;
    for c in &include {
        let s = per_class.get(c).ok_or(Error::InvalidClass(*c))?;
        sum_p += s.precision;
        sum_r += s.recall;
    }
    let n = include.len() as f64;
    Ok(ScoreReport { per_class, macro_classes: include, macro_precision: sum_p / n, macro_recall: sum_r / n })
}

/// Median of `values`; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
