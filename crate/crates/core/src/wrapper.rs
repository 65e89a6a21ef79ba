//! Wrapper phase: gain-ordered sequential forward selection.
//!
//! The search starts from the single best-ranked feature and walks the rest
//! of the ranking once. Each candidate is appended to the current subset and
//! scored with KNN accuracy; it stays only if accuracy beats the best seen so
//! far by more than `epsilon`.

use serde::{Deserialize, Serialize};

use crate::dataset::{split, AttackCategory, Dataset, SplitMode, SplitSpec};
use crate::entropy::GainTable;
use crate::error::{Error, Result};
use crate::knn::{evaluate, EvaluationReport, FeatureSubset, KnnConfig};

/// Direction in which the gain ranking is walked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankOrder {
    /// Highest gain first.
    #[default]
    Descending,
    /// Lowest gain first.
    Ascending,
}

/// Where candidate subsets are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalSplit {
    /// Carve a random fraction out of the training set.
    Holdout { fraction: f64, seed: u64 },
    /// Score on a caller-supplied set, see [`select_features_with`].
    Provided,
}

impl Default for EvalSplit {
    fn default() -> Self {
        EvalSplit::Holdout {
            fraction: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapperConfig {
    /// Largest subset the search may grow to.
    pub max_features: Option<usize>,
    pub knn: KnnConfig,
    /// Required accuracy improvement; acceptance is `after > before + epsilon`.
    pub epsilon: f64,
    pub eval: EvalSplit,
    pub order: RankOrder,
    /// Stop after this many consecutive rejections.
    pub patience: Option<usize>,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        WrapperConfig {
            max_features: None,
            knn: KnnConfig::default(),
            epsilon: 0.0,
            eval: EvalSplit::default(),
            order: RankOrder::Descending,
            patience: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub candidate: usize,
    pub subset_before: FeatureSubset,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub seed_feature: usize,
    pub seed_accuracy: f64,
    pub steps: Vec<SelectionStep>,
    pub final_subset: FeatureSubset,
    pub final_accuracy: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SelectionTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &SelectionStep> {
        self.steps.iter().filter(|s| s.accepted)
    }

    /// Human-readable log, one line per step.
    pub fn step_log(&self) -> String {
        let mut out = format!(
            "seed feature {}: accuracy {:.4}\n",
            self.seed_feature, self.seed_accuracy
        );
        for s in &self.steps {
            out.push_str(&format!(
                "try {:>2} on [{}]: {:.4} -> {:.4} {}\n",
                s.candidate,
                s.subset_before,
                s.accuracy_before,
                s.accuracy_after,
                if s.accepted { "accept" } else { "reject" }
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push_str(&format!(
            "final [{}]: accuracy {:.4}\n",
            self.final_subset, self.final_accuracy
        ));
        out
    }
}

/// Splits `train` into the part KNN is fitted on and the part candidates are
/// scored on.
pub fn holdout_split(train: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout fraction {fraction} is outside (0, 1)"
        )));
    }
    split(
        train,
        &SplitSpec {
            mode: SplitMode::RandomSplit {
                train_fraction: 1.0 - fraction,
            },
            seed,
            sample_size: None,
        },
    )
}

/// Runs the search, scoring on a holdout carved from `train`.
pub fn select_features(
    train: &Dataset,
    gains: &GainTable,
    cfg: &WrapperConfig,
) -> Result<SelectionTrace> {
    match cfg.eval {
        EvalSplit::Holdout { fraction, seed } => {
            let (fit, eval) = holdout_split(train, fraction, seed)?;
            select_features_with(&fit, &eval, gains, cfg)
        }
        EvalSplit::Provided => Err(Error::invalid(
            "evaluation set not supplied; call select_features_with",
        )),
    }
}

/// Runs the search with KNN fitted on `fit` and scored on `eval`.
pub fn select_features_with(
    fit: &Dataset,
    eval: &Dataset,
    gains: &GainTable,
    cfg: &WrapperConfig,
) -> Result<SelectionTrace> {
    let order = candidate_order(fit, gains, cfg.order)?;
    let score = |s: &FeatureSubset| evaluate(fit, eval, s, &cfg.knn).map(|r| r.accuracy);

    let mut warnings = Vec::new();
    let fit_counts = fit.category_counts();
    let eval_counts = eval.category_counts();
    for c in AttackCategory::ALL {
        if fit_counts[c.index()] > 0 && eval_counts[c.index()] == 0 {
            warnings.push(format!("category {c} is absent from the evaluation split"));
        }
    }

    let seed_feature = order[0];
    let mut best = FeatureSubset::try_from(vec![seed_feature])?;
    let seed_accuracy = score(&best)?;
    let mut best_accuracy = seed_accuracy;
    let mut steps = Vec::new();
    let mut rejections = 0;

    for &candidate in &order[1..] {
        if cfg.max_features.is_some_and(|m| best.len() >= m) {
            break;
        }
        if cfg.patience.is_some_and(|p| rejections >= p) {
            break;
        }
        let trial = best.with(candidate);
        let accuracy = score(&trial)?;
        let accepted = accuracy > best_accuracy + cfg.epsilon;
        steps.push(SelectionStep {
            candidate,
            subset_before: best.clone(),
            accuracy_before: best_accuracy,
            accuracy_after: accuracy,
            accepted,
        });
        if accepted {
            best = trial;
            best_accuracy = accuracy;
            rejections = 0;
        } else {
            rejections += 1;
        }
    }

    Ok(SelectionTrace {
        seed_feature,
        seed_accuracy,
        steps,
        final_subset: best,
        final_accuracy: best_accuracy,
        warnings,
    })
}

fn candidate_order(ds: &Dataset, gains: &GainTable, order: RankOrder) -> Result<Vec<usize>> {
    if gains.ranking.is_empty() {
        return Err(Error::Empty("gain table"));
    }
    let n = ds.n_features();
    if gains.ranking.len() != n {
        return Err(Error::SchemaMismatch(format!(
            "gain table ranks {} features, dataset has {n}",
            gains.ranking.len()
        )));
    }
    // rejects duplicates and out-of-range indices
    FeatureSubset::new(gains.ranking.clone(), n)?;
    let mut v = gains.ranking.clone();
    if order == RankOrder::Ascending {
        v.reverse();
    }
    Ok(v)
}

/// Re-runs every evaluation recorded in a trace and returns the accuracies
/// in order: seed first, then one per step.
pub fn replay(
    trace: &SelectionTrace,
    fit: &Dataset,
    eval: &Dataset,
    knn: &KnnConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.steps.len() + 1);
    let seed = FeatureSubset::try_from(vec![trace.seed_feature])?;
    out.push(evaluate(fit, eval, &seed, knn)?.accuracy);
    for s in &trace.steps {
        let subset = s.subset_before.with(s.candidate);
        out.push(evaluate(fit, eval, &subset, knn)?.accuracy);
    }
    Ok(out)
}

/// Test-set accuracy with every feature and with the selected subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub full: EvaluationReport,
    pub selected: EvaluationReport,
    /// `selected.accuracy - full.accuracy`.
    pub difference: f64,
}

pub fn compare_full_vs_selected(
    train: &Dataset,
    test: &Dataset,
    trace: &SelectionTrace,
    cfg: &WrapperConfig,
) -> Result<Comparison> {
    let full = evaluate(
        train,
        test,
        &FeatureSubset::all(train.n_features()),
        &cfg.knn,
    )?;
    let selected = evaluate(train, test, &trace.final_subset, &cfg.knn)?;
    let difference = selected.accuracy - full.accuracy;
    Ok(Comparison {
        full,
        selected,
        difference,
    })
}
