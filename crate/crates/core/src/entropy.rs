//! Filter phase: class entropy, conditional entropy over feature bins,
//! information gain (multi-class and one-vs-rest) and feature ranking.
//!
//! All quantities are in bits and `0 * log 0` is taken as 0. Continuous
//! features are binned first (see [`discretize`]); discrete features use
//! their dictionary codes as bins.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttackCategory, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

const N_CLASSES: usize = AttackCategory::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscretizationMethod {
    #[default]
    EqualFrequency,
    EqualWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub method: DiscretizationMethod,
    pub bins: usize,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        DiscretizationSpec {
            method: DiscretizationMethod::EqualFrequency,
            bins: 10,
        }
    }
}

impl DiscretizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::invalid(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        Ok(())
    }
}

fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Class entropy of a label sequence.
pub fn class_entropy(labels: &[AttackCategory]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("label sequence"));
    }
    let mut counts = [0usize; N_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    Ok(entropy_of_counts(&counts, labels.len()))
}

/// Bin-by-category counts, bins in ascending id order.
struct Contingency {
    cells: Vec<[usize; N_CLASSES]>,
    totals: [usize; N_CLASSES],
    n: usize,
}

impl Contingency {
    fn build(bins: &[u32], labels: &[AttackCategory]) -> Result<Self> {
        if bins.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: bins.len(),
                right: labels.len(),
            });
        }
        if bins.is_empty() {
            return Err(Error::Empty("bin sequence"));
        }
        let n = bins.len();
        let max = *bins.iter().max().unwrap() as usize;
        let mut cells = if max <= 4 * n + 64 {
            let mut dense = vec![[0usize; N_CLASSES]; max + 1];
            for (&b, l) in bins.iter().zip(labels) {
                dense[b as usize][l.index()] += 1;
            }
            dense
        } else {
            let mut sparse: BTreeMap<u32, [usize; N_CLASSES]> = BTreeMap::new();
            for (&b, l) in bins.iter().zip(labels) {
                sparse.entry(b).or_default()[l.index()] += 1;
            }
            sparse.into_values().collect()
        };
        cells.retain(|c| c.iter().any(|&x| x > 0));
        let mut totals = [0; N_CLASSES];
        for c in &cells {
            for k in 0..N_CLASSES {
                totals[k] += c[k];
            }
        }
        Ok(Contingency { cells, totals, n })
    }

    fn class_entropy(&self) -> f64 {
        entropy_of_counts(&self.totals, self.n)
    }

    fn expected_info(&self) -> f64 {
        let n = self.n as f64;
        self.cells
            .iter()
            .map(|c| {
                let nj: usize = c.iter().sum();
                (nj as f64 / n) * entropy_of_counts(c, nj)
            })
            .sum()
    }

    fn gain(&self) -> f64 {
        clamp_gain(self.class_entropy() - self.expected_info())
    }

    /// Gain for the binary problem "is `target`" vs "is anything else".
    fn one_vs_rest(&self, target: AttackCategory) -> f64 {
        let t = target.index();
        let binary = |c: &[usize; N_CLASSES], total: usize| [total - c[t], c[t]];
        let h = entropy_of_counts(&binary(&self.totals, self.n), self.n);
        let n = self.n as f64;
        let e: f64 = self
            .cells
            .iter()
            .map(|c| {
                let nj: usize = c.iter().sum();
                (nj as f64 / n) * entropy_of_counts(&binary(c, nj), nj)
            })
            .sum();
        clamp_gain(h - e)
    }
}

fn clamp_gain(g: f64) -> f64 {
    if g < 0.0 {
        debug_assert!(g > -1e-9, "gain {g} is negative beyond rounding");
        0.0
    } else {
        g
    }
}

/// Weighted entropy of the labels within each bin.
pub fn expected_info(bins: &[u32], labels: &[AttackCategory]) -> Result<f64> {
    Ok(Contingency::build(bins, labels)?.expected_info())
}

/// Class entropy minus expected information, floored at zero.
pub fn information_gain(bins: &[u32], labels: &[AttackCategory]) -> Result<f64> {
    Ok(Contingency::build(bins, labels)?.gain())
}

/// Information gain with the labels collapsed to `target` vs. the rest.
pub fn per_class_gain(
    bins: &[u32],
    labels: &[AttackCategory],
    target: AttackCategory,
) -> Result<f64> {
    Ok(Contingency::build(bins, labels)?.one_vs_rest(target))
}

/// Maps a column to bin ids.
///
/// Discrete columns holding non-negative integer codes are returned as is;
/// any other discrete column is ranked by distinct value. Continuous
/// columns use the configured method. Equal-frequency cut points sit at the
/// sorted positions `i * n / bins`; repeated cut points and a cut at the
/// column minimum are dropped, so heavy ties yield fewer bins.
pub fn discretize(
    column: &[f64],
    kind: FeatureKind,
    spec: &DiscretizationSpec,
) -> Result<Vec<u32>> {
    if column.is_empty() {
        return Err(Error::Empty("column"));
    }
    spec.validate()?;
    match kind {
        FeatureKind::Discrete => Ok(discrete_bins(column)),
        FeatureKind::Continuous => match spec.method {
            DiscretizationMethod::EqualFrequency => Ok(equal_frequency(column, spec.bins)),
            DiscretizationMethod::EqualWidth => Ok(equal_width(column, spec.bins)),
        },
    }
}

fn discrete_bins(column: &[f64]) -> Vec<u32> {
    let is_code = |v: f64| v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX);
    if column.iter().all(|&v| is_code(v)) {
        return column.iter().map(|&v| v as u32).collect();
    }
    let mut distinct = column.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    column
        .iter()
        .map(|v| distinct.partition_point(|d| d < v) as u32)
        .collect()
}

fn equal_frequency(column: &[f64], bins: usize) -> Vec<u32> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let mut cuts: Vec<f64> = Vec::with_capacity(bins - 1);
    for i in 1..bins {
        let c = sorted[(i * n) / bins];
        if c > min && cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    column
        .iter()
        .map(|&v| cuts.partition_point(|&c| c <= v) as u32)
        .collect()
}

fn equal_width(column: &[f64], bins: usize) -> Vec<u32> {
    let (min, max) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max <= min {
        return vec![0; column.len()];
    }
    let width = (max - min) / bins as f64;
    column
        .iter()
        .map(|&v| (((v - min) / width).floor() as usize).min(bins - 1) as u32)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub index: usize,
    pub name: String,
    pub gain: f64,
    pub per_class_gain: BTreeMap<AttackCategory, f64>,
}

/// Output of the filter phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    pub class_entropy: f64,
    /// One entry per feature, in feature index order.
    pub features: Vec<FeatureGain>,
    /// 1-based feature indices, highest gain first, ties by lower index.
    pub ranking: Vec<usize>,
}

impl GainTable {
    /// Assembles a table from precomputed entries and derives the ranking.
    pub fn from_features(class_entropy: f64, mut features: Vec<FeatureGain>) -> Self {
        features.sort_by_key(|f| f.index);
        let mut ranking: Vec<(usize, f64)> = features.iter().map(|f| (f.index, f.gain)).collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        GainTable {
            class_entropy,
            features,
            ranking: ranking.into_iter().map(|(i, _)| i).collect(),
        }
    }

    /// Table with the given multi-class gains and no per-class breakdown.
    pub fn from_gains(schema: &FeatureSchema, gains: &[f64]) -> Result<Self> {
        if gains.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} gains for {} features",
                gains.len(),
                schema.len()
            )));
        }
        let features = schema
            .features()
            .iter()
            .zip(gains)
            .map(|(d, &gain)| FeatureGain {
                index: d.index,
                name: d.name.clone(),
                gain,
                per_class_gain: BTreeMap::new(),
            })
            .collect();
        let h = gains.iter().copied().fold(0.0, f64::max);
        Ok(Self::from_features(h, features))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn gain(&self, index: usize) -> Option<f64> {
        self.entry(index).map(|f| f.gain)
    }

    pub fn entry(&self, index: usize) -> Option<&FeatureGain> {
        self.features
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|i| &self.features[i])
    }

    /// 1-based position of a feature in the ranking.
    pub fn rank_of(&self, index: usize) -> Option<usize> {
        self.ranking.iter().position(|&i| i == index).map(|p| p + 1)
    }
}

/// Scores every feature of `train` and ranks them.
pub fn build_gain_table(train: &Dataset, spec: &DiscretizationSpec) -> Result<GainTable> {
    if train.n_rows() < 2 {
        return Err(Error::invalid("gain table needs at least 2 rows"));
    }
    spec.validate()?;
    let labels = train.labels();
    let features = train
        .schema()
        .features()
        .par_iter()
        .map(|desc| {
            let bins = discretize(&train.column(desc.index), desc.kind, spec)?;
            let table = Contingency::build(&bins, labels)?;
            let per_class_gain = AttackCategory::ALL
                .iter()
                .map(|&c| (c, table.one_vs_rest(c)))
                .collect();
            Ok(FeatureGain {
                index: desc.index,
                name: desc.name.clone(),
                gain: table.gain(),
                per_class_gain,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainTable::from_features(class_entropy(labels)?, features))
}
