//! Brute-force k-nearest-neighbor classification over a feature subset.
//!
//! Neighbors are ordered by `(distance, row key)`, where the row key is the
//! record's position in its source file, so the neighbor set never depends on
//! how rows happen to be stored. Vote ties go to the tied category whose
//! nearest member is closest, then to the fixed category order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttackCategory, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 10,
            metric: Metric::Euclidean,
            weighting: Weighting::Uniform,
        }
    }
}

impl KnnConfig {
    pub fn with_k(k: usize) -> Self {
        KnnConfig {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(())
    }
}

/// Ordered, duplicate-free list of 1-based feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    /// Validates against a schema of `n_features` columns.
    pub fn new(indices: Vec<usize>, n_features: usize) -> Result<Self> {
        let s = Self::try_from(indices)?;
        if let Some(&bad) = s.0.iter().find(|&&i| i > n_features) {
            return Err(Error::invalid(format!(
                "feature {bad} does not exist (schema has {n_features})"
            )));
        }
        Ok(s)
    }

    /// Every feature `1..=n`.
    pub fn all(n_features: usize) -> Self {
        FeatureSubset((1..=n_features).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    /// Copy with `index` appended (no-op if already present).
    pub fn with(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        if !v.contains(&index) {
            v.push(index);
        }
        FeatureSubset(v)
    }

    /// Indices in ascending order, the notation used in result tables.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }

    fn check(&self, n_features: usize) -> Result<Vec<usize>> {
        if self.0.is_empty() {
            return Err(Error::Empty("feature subset"));
        }
        self.0
            .iter()
            .map(|&i| {
                if i == 0 || i > n_features {
                    Err(Error::invalid(format!(
                        "feature {i} does not exist (schema has {n_features})"
                    )))
                } else {
                    Ok(i - 1)
                }
            })
            .collect()
    }
}

impl TryFrom<Vec<usize>> for FeatureSubset {
    type Error = Error;

    fn try_from(indices: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &i in &indices {
            if i == 0 {
                return Err(Error::invalid("feature indices are 1-based"));
            }
            if !seen.insert(i) {
                return Err(Error::invalid(format!("feature {i} listed twice")));
            }
        }
        Ok(FeatureSubset(indices))
    }
}

impl From<FeatureSubset> for Vec<usize> {
    fn from(s: FeatureSubset) -> Self {
        s.0
    }
}

/// Comma-separated ascending indices, e.g. `5,12,21,22,23,24`.
impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.sorted().iter().map(usize::to_string).collect();
        f.write_str(&s.join(","))
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indices = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("`{t}` is not a feature index")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::try_from(indices)
    }
}

fn metric_distance(
    a: impl Iterator<Item = f64>,
    b: impl Iterator<Item = f64>,
    metric: Metric,
) -> f64 {
    match metric {
        Metric::Euclidean => a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Manhattan => a.zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

/// Distance between two records over the subset's coordinates.
pub fn distance(a: &[f64], b: &[f64], subset: &FeatureSubset, metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SchemaMismatch(format!(
            "records of width {} and {}",
            a.len(),
            b.len()
        )));
    }
    let cols = subset.check(a.len())?;
    Ok(metric_distance(
        cols.iter().map(|&c| a[c]),
        cols.iter().map(|&c| b[c]),
        metric,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Position in the training dataset.
    pub row: usize,
    pub row_id: u64,
    pub distance: f64,
    pub label: AttackCategory,
}

/// Training rows projected onto a subset, ready for repeated queries.
pub struct Classifier<'a> {
    train: &'a Dataset,
    cols: Vec<usize>,
    projected: Vec<f64>,
    cfg: KnnConfig,
}

impl<'a> Classifier<'a> {
    pub fn new(train: &'a Dataset, subset: &FeatureSubset, cfg: KnnConfig) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let cols = subset.check(train.n_features())?;
        let mut projected = Vec::with_capacity(train.n_rows() * cols.len());
        for row in train.rows() {
            projected.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(Classifier {
            train,
            cols,
            projected,
            cfg,
        })
    }

    /// The `k` nearest training rows, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Vec<Neighbor> {
        let d = self.cols.len();
        let q: Vec<f64> = self.cols.iter().map(|&c| query[c]).collect();
        let ids = self.train.row_ids();
        let k = self.cfg.k.min(self.train.n_rows());
        // sorted by (distance, row_id); at most k entries
        let mut best: Vec<(f64, u64, usize)> = Vec::with_capacity(k + 1);
        for (row, point) in self.projected.chunks_exact(d).enumerate() {
            let dist = metric_distance(q.iter().copied(), point.iter().copied(), self.cfg.metric);
            let key = (dist, ids[row]);
            if best.len() == k && !key_lt(key, (best[k - 1].0, best[k - 1].1)) {
                continue;
            }
            let pos = best.partition_point(|e| key_lt((e.0, e.1), key));
            best.insert(pos, (dist, ids[row], row));
            best.truncate(k);
        }
        best.into_iter()
            .map(|(distance, row_id, row)| Neighbor {
                row,
                row_id,
                distance,
                label: self.train.labels()[row],
            })
            .collect()
    }

    pub fn predict(&self, query: &[f64]) -> AttackCategory {
        vote(&self.neighbors(query), self.cfg.weighting)
    }
}

fn key_lt(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt()
}

/// Majority (or inverse-distance weighted) vote over neighbors sorted
/// nearest first.
pub fn vote(neighbors: &[Neighbor], weighting: Weighting) -> AttackCategory {
    let mut score = [0.0f64; AttackCategory::COUNT];
    let mut first = [usize::MAX; AttackCategory::COUNT];
    let exact = neighbors.iter().any(|n| n.distance == 0.0);
    for (pos, n) in neighbors.iter().enumerate() {
        let c = n.label.index();
        first[c] = first[c].min(pos);
        score[c] += match weighting {
            Weighting::Uniform => 1.0,
            // exact matches outvote everything else
            Weighting::InverseDistance if exact => f64::from(u8::from(n.distance == 0.0)),
            Weighting::InverseDistance => 1.0 / n.distance,
        };
    }
    let mut winner = 0;
    for c in 1..AttackCategory::COUNT {
        let better =
            score[c] > score[winner] || (score[c] == score[winner] && first[c] < first[winner]);
        if better {
            winner = c;
        }
    }
    AttackCategory::ALL[winner]
}

/// Predicts the category of one record.
pub fn predict(
    train: &Dataset,
    query: &[f64],
    subset: &FeatureSubset,
    cfg: &KnnConfig,
) -> Result<AttackCategory> {
    if query.len() != train.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "query has {} values, training set has {} features",
            query.len(),
            train.n_features()
        )));
    }
    Ok(Classifier::new(train, subset, *cfg)?.predict(query))
}

/// Accuracy of a classifier on a labelled test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub subset: FeatureSubset,
    pub k: usize,
    /// Correct predictions.
    pub positives: usize,
    pub total: usize,
    /// `positives / total`.
    pub accuracy: f64,
    /// Rows are actual categories, columns predicted, both in the order
    /// Normal, DOS, Probe, R2L, U2R.
    pub confusion: [[usize; AttackCategory::COUNT]; AttackCategory::COUNT],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "subset,k,positives,total,accuracy";

    pub fn from_predictions(
        subset: FeatureSubset,
        k: usize,
        actual: &[AttackCategory],
        predicted: &[AttackCategory],
    ) -> Self {
        let mut confusion = [[0; AttackCategory::COUNT]; AttackCategory::COUNT];
        let mut positives = 0;
        for (a, p) in actual.iter().zip(predicted) {
            confusion[a.index()][p.index()] += 1;
            positives += usize::from(a == p);
        }
        let total = actual.len();
        EvaluationReport {
            subset,
            k,
            positives,
            total,
            accuracy: positives as f64 / total as f64,
            confusion,
            elapsed_secs: None,
        }
    }

    /// One CSV line matching [`Self::CSV_HEADER`], without trailing newline.
    pub fn csv_row(&self) -> String {
        format!(
            "\"{}\",{},{},{},{}",
            self.subset, self.k, self.positives, self.total, self.accuracy
        )
    }
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.schema() != test.schema() {
        return Err(Error::SchemaMismatch(
            "train and test sets have different feature layouts".into(),
        ));
    }
    Ok(())
}

/// Predictions for every test record, in test order.
pub fn predict_all(
    train: &Dataset,
    test: &Dataset,
    subset: &FeatureSubset,
    cfg: &KnnConfig,
) -> Result<Vec<AttackCategory>> {
    check_compatible(train, test)?;
    let clf = Classifier::new(train, subset, *cfg)?;
    let queries: Vec<&[f64]> = test.rows().collect();
    Ok(queries.par_iter().map(|q| clf.predict(q)).collect())
}

/// Classifies every test record and tallies the results.
pub fn evaluate(
    train: &Dataset,
    test: &Dataset,
    subset: &FeatureSubset,
    cfg: &KnnConfig,
) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let start = Instant::now();
    let predicted = predict_all(train, test, subset, cfg)?;
    let mut report =
        EvaluationReport::from_predictions(subset.clone(), cfg.k, test.labels(), &predicted);
    report.elapsed_secs = Some(start.elapsed().as_secs_f64());
    Ok(report)
}
