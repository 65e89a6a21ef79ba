//! Size-sweep experiments, result emission and synthetic data.

use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample, AttackCategory, Dataset, FeatureKind, FeatureSchema};
use crate::entropy::{build_gain_table, DiscretizationSpec, FeatureGain, GainTable};
use crate::error::{Error, Result};
use crate::knn::{FeatureSubset, KnnConfig};
use crate::wrapper::{
    compare_full_vs_selected, select_features, select_features_with, EvalSplit, SelectionTrace,
    WrapperConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Sample sizes of the published comparison table.
pub const DEFAULT_SIZES: [usize; 6] = [1000, 10000, 50000, 100000, 150000, 250000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub discretization: DiscretizationSpec,
    /// Classifier used both inside the search and for the final comparison;
    /// overrides `wrapper.knn`.
    #[serde(default)]
    pub knn: KnnConfig,
    #[serde(default)]
    pub wrapper: WrapperConfig,
    /// Cap on test records per cell, sampled with the cell's seed.
    #[serde(default)]
    pub test_size: Option<usize>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            sizes: DEFAULT_SIZES.to_vec(),
            seeds: vec![0],
            discretization: DiscretizationSpec::default(),
            knn: KnnConfig::default(),
            wrapper: WrapperConfig::default(),
            test_size: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("plan needs at least one size and one seed"));
        }
        if self.sizes.contains(&0) {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        self.discretization.validate()?;
        self.knn.validate()
    }

    /// Wrapper settings for one cell: the plan's classifier, and a holdout
    /// drawn with the cell's seed. With [`EvalSplit::Provided`] candidates
    /// are scored on the cell's test set.
    fn wrapper_for(&self, seed: u64) -> WrapperConfig {
        let mut cfg = self.wrapper;
        cfg.knn = self.knn;
        if let EvalSplit::Holdout { fraction, .. } = cfg.eval {
            cfg.eval = EvalSplit::Holdout { fraction, seed };
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTimings {
    pub gain_secs: f64,
    pub select_secs: f64,
    pub compare_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub selected_subset: FeatureSubset,
    pub accuracy_full: f64,
    pub accuracy_selected: f64,
    pub ranking: Vec<usize>,
    pub trace: SelectionTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<CellTimings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Completed(Box<CellResult>),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub size: usize,
    pub seed: u64,
    pub outcome: CellOutcome,
}

impl ExperimentCell {
    pub fn result(&self) -> Option<&CellResult> {
        match &self.outcome {
            CellOutcome::Completed(r) => Some(r),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDocument {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentDocument {
    /// Drops wall-clock measurements so the document is a pure function of
    /// its inputs.
    pub fn strip_timings(&mut self) {
        for cell in &mut self.cells {
            if let CellOutcome::Completed(r) = &mut cell.outcome {
                r.timings = None;
            }
        }
    }
}

fn run_cell(
    plan: &ExperimentPlan,
    train: &Dataset,
    test: &Dataset,
    size: usize,
    seed: u64,
) -> Result<CellResult> {
    let pool = sample(train, size, seed)?;
    let test = match plan.test_size {
        Some(n) if n < test.n_rows() => sample(test, n, seed)?,
        _ => test.clone(),
    };
    let cfg = plan.wrapper_for(seed);

    let t = Instant::now();
    let gains = build_gain_table(&pool, &plan.discretization)?;
    let gain_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let trace = match cfg.eval {
        EvalSplit::Provided => select_features_with(&pool, &test, &gains, &cfg)?,
        EvalSplit::Holdout { .. } => select_features(&pool, &gains, &cfg)?,
    };
    let select_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let cmp = compare_full_vs_selected(&pool, &test, &trace, &cfg)?;
    let compare_secs = t.elapsed().as_secs_f64();

    Ok(CellResult {
        selected_subset: trace.final_subset.clone(),
        accuracy_full: cmp.full.accuracy,
        accuracy_selected: cmp.selected.accuracy,
        ranking: gains.ranking,
        trace,
        timings: Some(CellTimings {
            gain_secs,
            select_secs,
            compare_secs,
        }),
    })
}

/// Runs every (size, seed) cell of the plan. A failing cell is recorded and
/// does not affect the others.
pub fn run_experiment(
    plan: &ExperimentPlan,
    train: &Dataset,
    test: &Dataset,
) -> Result<ExperimentDocument> {
    plan.validate()?;
    if train.schema() != test.schema() {
        return Err(Error::SchemaMismatch(
            "train and test sets have different feature layouts".into(),
        ));
    }
    let grid: Vec<(usize, u64)> = plan
        .sizes
        .iter()
        .flat_map(|&size| plan.seeds.iter().map(move |&seed| (size, seed)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(size, seed)| ExperimentCell {
            size,
            seed,
            outcome: match run_cell(plan, train, test, size, seed) {
                Ok(r) => CellOutcome::Completed(Box::new(r)),
                Err(e) => CellOutcome::Failed {
                    error: e.to_string(),
                },
            },
        })
        .collect();
    Ok(ExperimentDocument {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        cells,
    })
}

fn csv_text(field: &str) -> String {
    if field.is_empty() || field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Fraction as a percentage with two decimals, e.g. `91.01%`.
pub fn percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

pub const GAIN_HEADER: &str = "index,name,gain,gain_normal,gain_dos,gain_probe,gain_r2l,gain_u2r";

/// One row per feature in index order. Numbers are written in shortest
/// round-trip form; per-category columns are empty when not computed.
pub fn emit_gain_report<W: Write>(gains: &GainTable, mut sink: W) -> Result<()> {
    writeln!(sink, "{GAIN_HEADER}")?;
    for f in &gains.features {
        write!(sink, "{},{},{}", f.index, csv_text(&f.name), f.gain)?;
        for c in AttackCategory::ALL {
            match f.per_class_gain.get(&c) {
                Some(g) => write!(sink, ",{g}")?,
                None => write!(sink, ",")?,
            }
        }
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}

/// The same gains ordered by rank.
pub fn emit_gain_ranking<W: Write>(gains: &GainTable, mut sink: W) -> Result<()> {
    writeln!(sink, "rank,index,name,gain")?;
    for (rank, &idx) in gains.ranking.iter().enumerate() {
        let f = gains
            .entry(idx)
            .ok_or_else(|| Error::invalid(format!("ranking lists unknown feature {idx}")))?;
        writeln!(
            sink,
            "{},{},{},{}",
            rank + 1,
            idx,
            csv_text(&f.name),
            f.gain
        )?;
    }
    sink.flush()?;
    Ok(())
}

/// Parses the output of [`emit_gain_report`].
pub fn read_gain_report<R: Read>(input: R) -> Result<Vec<FeatureGain>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .unwrap_or_default()
                .parse()
                .map_err(|_| Error::parse(line, format!("column {} is not numeric", j + 1)))
        };
        let index = rec
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::parse(line, "bad feature index"))?;
        let mut per_class_gain = std::collections::BTreeMap::new();
        for (k, c) in AttackCategory::ALL.iter().enumerate() {
            if !rec.get(3 + k).unwrap_or_default().is_empty() {
                per_class_gain.insert(*c, num(3 + k)?);
            }
        }
        out.push(FeatureGain {
            index,
            name: rec.get(1).unwrap_or_default().to_string(),
            gain: num(2)?,
            per_class_gain,
        });
    }
    Ok(out)
}

pub const COMPARISON_HEADER: &str = "size,seed,subset,acc_full,acc_selected";

fn completed_sorted(doc: &ExperimentDocument) -> Vec<(usize, u64, &CellResult)> {
    let mut rows: Vec<_> = doc
        .cells
        .iter()
        .filter_map(|c| c.result().map(|r| (c.size, c.seed, r)))
        .collect();
    rows.sort_by_key(|&(size, seed, _)| (size, seed));
    rows
}

/// Comparison table, completed cells only, ascending by size then seed.
pub fn emit_comparison<W: Write>(doc: &ExperimentDocument, mut sink: W) -> Result<()> {
    writeln!(sink, "{COMPARISON_HEADER}")?;
    for (size, seed, r) in completed_sorted(doc) {
        writeln!(
            sink,
            "{size},{seed},{},{},{}",
            csv_text(&r.selected_subset.to_string()),
            percent(r.accuracy_full),
            percent(r.accuracy_selected)
        )?;
    }
    sink.flush()?;
    Ok(())
}

/// Plot data: `size acc_full acc_selected` in percent, one line per size,
/// averaged over that size's completed seeds.
pub fn emit_plot_data<W: Write>(doc: &ExperimentDocument, mut sink: W) -> Result<()> {
    writeln!(sink, "# size acc_full acc_selected")?;
    let rows = completed_sorted(doc);
    for group in rows.chunk_by(|a, b| a.0 == b.0) {
        let n = group.len() as f64;
        let full = group.iter().map(|r| r.2.accuracy_full).sum::<f64>() / n;
        let sel = group.iter().map(|r| r.2.accuracy_selected).sum::<f64>() / n;
        writeln!(
            sink,
            "{} {:.2} {:.2}",
            group[0].0,
            full * 100.0,
            sel * 100.0
        )?;
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticLayout {
    /// `informative_features + noise_features` continuous columns,
    /// informative ones first.
    #[default]
    Generic,
    /// The 41-column connection record layout. Informative signal goes into
    /// the first continuous columns; discrete columns carry small random
    /// codes.
    Kdd99,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub informative_features: usize,
    pub noise_features: usize,
    /// Normal, DOS, Probe, R2L, U2R.
    pub class_proportions: [f64; AttackCategory::COUNT],
    /// Gap between adjacent class means on an informative feature, in units
    /// of the within-class standard deviation.
    pub separation: f64,
    /// Standard deviation of noise features.
    pub noise_scale: f64,
    pub seed: u64,
    pub layout: SyntheticLayout,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 2000,
            informative_features: 3,
            noise_features: 7,
            class_proportions: [0.2; AttackCategory::COUNT],
            separation: 1.0,
            noise_scale: 3.0,
            seed: 0,
            layout: SyntheticLayout::Generic,
        }
    }
}

fn category_counts(
    rows: usize,
    proportions: &[f64; AttackCategory::COUNT],
) -> [usize; AttackCategory::COUNT] {
    // largest remainder
    let exact: Vec<f64> = proportions.iter().map(|p| p * rows as f64).collect();
    let mut counts = [0usize; AttackCategory::COUNT];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut left = rows - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..AttackCategory::COUNT).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if proportions[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// Labelled records with a known split between informative and noise
/// features.
///
/// Informative feature `j` (0-based) puts category `c` at mean
/// `separation * ((c + j) mod 5)` with unit variance, so every informative
/// feature separates every pair of categories and different features order
/// the categories differently. Noise features are `N(0, noise_scale)`
/// independent of the label.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let p = &spec.class_proportions;
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(
            "class proportions must be non-negative and sum to 1",
        ));
    }
    if spec.rows == 0 {
        return Err(Error::invalid("rows must be positive"));
    }
    let width = spec.informative_features + spec.noise_features;
    if width == 0 {
        return Err(Error::invalid("at least one feature is required"));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(Error::invalid("separation must be finite and non-negative"));
    }
    let noise = Normal::new(0.0, spec.noise_scale)
        .map_err(|e| Error::invalid(format!("noise scale: {e}")))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let schema = match spec.layout {
        SyntheticLayout::Generic => FeatureSchema::new(
            (1..=spec.informative_features)
                .map(|i| format!("informative_{i}"))
                .chain((1..=spec.noise_features).map(|i| format!("noise_{i}")))
                .map(|n| (n, FeatureKind::Continuous)),
        ),
        SyntheticLayout::Kdd99 => {
            if width != 41 {
                return Err(Error::invalid(format!(
                    "the 41-column layout needs informative + noise = 41, got {width}"
                )));
            }
            FeatureSchema::kdd99()
        }
    };
    // role per column: Some(j) = j-th informative feature
    let continuous: Vec<usize> = schema
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FeatureKind::Continuous)
        .map(|(i, _)| i)
        .collect();
    if continuous.len() < spec.informative_features {
        return Err(Error::invalid(
            "more informative features than continuous columns",
        ));
    }
    let mut role = vec![None; width];
    for (j, &col) in continuous
        .iter()
        .take(spec.informative_features)
        .enumerate()
    {
        role[col] = Some(j);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let counts = category_counts(spec.rows, p);
    let mut labels: Vec<AttackCategory> = Vec::with_capacity(spec.rows);
    for (c, &n) in AttackCategory::ALL.iter().zip(&counts) {
        labels.extend(std::iter::repeat_n(*c, n));
    }
    labels.shuffle(&mut rng);

    let mut values = Vec::with_capacity(spec.rows * width);
    for label in &labels {
        for (col, r) in role.iter().enumerate() {
            let v = match (r, schema.features()[col].kind) {
                (Some(j), _) => {
                    let level = ((label.index() + j) % AttackCategory::COUNT) as f64;
                    spec.separation * level + unit.sample(&mut rng)
                }
                (None, FeatureKind::Discrete) => f64::from(rng.random_range(0u8..4)),
                (None, FeatureKind::Continuous) => noise.sample(&mut rng),
            };
            values.push(v);
        }
    }
    let raw = labels
        .iter()
        .map(|c| c.representative_label().to_string())
        .collect();
    Dataset::new(schema, values, labels, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::discretize;
    use crate::entropy::information_gain;
    use crate::knn::evaluate;

    fn tiny_doc() -> ExperimentDocument {
        let result = |subset: &str, full: f64, sel: f64| {
            CellOutcome::Completed(Box::new(CellResult {
                selected_subset: subset.parse().unwrap(),
                accuracy_full: full,
                accuracy_selected: sel,
                ranking: vec![],
                trace: SelectionTrace {
                    seed_feature: 1,
                    seed_accuracy: 0.0,
                    steps: vec![],
                    final_subset: subset.parse().unwrap(),
                    final_accuracy: 0.0,
                    warnings: vec![],
                },
                timings: None,
            }))
        };
        ExperimentDocument {
            schema_version: SCHEMA_VERSION,
            plan: ExperimentPlan::default(),
            cells: vec![
                ExperimentCell {
                    size: 10000,
                    seed: 2,
                    outcome: result("2,3,5,12", 0.7453, 0.9101),
                },
                ExperimentCell {
                    size: 1000,
                    seed: 1,
                    outcome: result("24,5", 0.7221, 0.8009),
                },
                ExperimentCell {
                    size: 500,
                    seed: 1,
                    outcome: CellOutcome::Failed {
                        error: "boom".into(),
                    },
                },
                ExperimentCell {
                    size: 10000,
                    seed: 1,
                    outcome: result("5", 0.7053, 0.9001),
                },
            ],
        }
    }

    #[test]
    fn percent_format() {
        assert_eq!(percent(0.9101), "91.01%");
        assert_eq!(percent(0.7221), "72.21%");
        assert_eq!(percent(1.0), "100.00%");
    }

    #[test]
    fn comparison_sorted_by_size() {
        let mut buf = Vec::new();
        emit_comparison(&tiny_doc(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], COMPARISON_HEADER);
        assert_eq!(lines[1], "1000,1,\"5,24\",72.21%,80.09%");
        assert_eq!(lines[2], "10000,1,5,70.53%,90.01%");
        assert_eq!(lines[3], "10000,2,\"2,3,5,12\",74.53%,91.01%");
        assert_eq!(lines.len(), 4);

        let mut plot = Vec::new();
        emit_plot_data(&tiny_doc(), &mut plot).unwrap();
        let plot = String::from_utf8(plot).unwrap();
        let lines: Vec<&str> = plot.lines().collect();
        assert_eq!(
            lines,
            vec![
                "# size acc_full acc_selected",
                "1000 72.21 80.09",
                "10000 72.53 90.51"
            ]
        );
    }

    #[test]
    fn one_cell_gives_one_line_per_series() {
        let mut doc = tiny_doc();
        doc.cells.truncate(1);
        let mut plot = Vec::new();
        emit_plot_data(&doc, &mut plot).unwrap();
        assert_eq!(String::from_utf8(plot).unwrap().lines().count(), 2);
    }

    #[test]
    fn gain_report_round_trip() {
        let schema = FeatureSchema::new([
            ("a", FeatureKind::Continuous),
            ("", FeatureKind::Discrete),
            ("x,y", FeatureKind::Continuous),
        ]);
        let gains = GainTable::from_gains(&schema, &[0.1 + 0.2, 1.0 / 3.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        emit_gain_report(&gains, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("2,\"\","));
        assert!(text.contains("\"x,y\""));
        let back = read_gain_report(buf.as_slice()).unwrap();
        assert_eq!(back, gains.features);

        let mut ranked = Vec::new();
        emit_gain_ranking(&gains, &mut ranked).unwrap();
        let ranked = String::from_utf8(ranked).unwrap();
        assert_eq!(
            ranked.lines().nth(1).unwrap(),
            "1,2,\"\",0.3333333333333333"
        );
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            rows: 300,
            seed: 5,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        crate::dataset::write_canonical(&a, &mut ba).unwrap();
        crate::dataset::write_canonical(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(a.category_counts(), [60; 5]);
        let c = generate_synthetic(&SyntheticSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        let bad = SyntheticSpec {
            class_proportions: [0.5, 0.5, 0.5, 0.0, 0.0],
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let neg = SyntheticSpec {
            class_proportions: [1.2, -0.2, 0.0, 0.0, 0.0],
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&neg).is_err());
        let kdd = SyntheticSpec {
            layout: SyntheticLayout::Kdd99,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&kdd).is_err());
        let kdd = SyntheticSpec {
            noise_features: 38,
            layout: SyntheticLayout::Kdd99,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&kdd).unwrap();
        assert_eq!(ds.n_features(), 41);
        assert!(ds.column(2).iter().all(|v| v.fract() == 0.0 && *v < 4.0));
    }

    #[test]
    fn uneven_proportions_use_largest_remainder() {
        assert_eq!(
            category_counts(10, &[0.25, 0.25, 0.25, 0.25, 0.0]),
            [3, 3, 2, 2, 0]
        );
        assert_eq!(
            category_counts(7, &[1.0, 0.0, 0.0, 0.0, 0.0]),
            [7, 0, 0, 0, 0]
        );
        let c = category_counts(1001, &[0.8, 0.15, 0.04, 0.009, 0.001]);
        assert_eq!(c.iter().sum::<usize>(), 1001);
    }

    #[test]
    fn noise_only_gains_pass_permutation_test() {
        let spec = SyntheticSpec {
            rows: 500,
            informative_features: 0,
            noise_features: 6,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let disc = DiscretizationSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for f in 1..=6 {
            let bins = discretize(&ds.column(f), FeatureKind::Continuous, &disc).unwrap();
            let observed = information_gain(&bins, ds.labels()).unwrap();
            let mut labels = ds.labels().to_vec();
            let mut null: Vec<f64> = (0..1000)
                .map(|_| {
                    labels.shuffle(&mut rng);
                    information_gain(&bins, &labels).unwrap()
                })
                .collect();
            null.sort_by(f64::total_cmp);
            let threshold = null[998];
            assert!(
                observed <= threshold,
                "feature {f}: {observed} > {threshold}"
            );
        }
    }

    #[test]
    fn wide_separation_is_perfectly_classified() {
        let spec = SyntheticSpec {
            rows: 400,
            separation: 1e3,
            seed: 8,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let (train, test) = crate::wrapper::holdout_split(&ds, 0.5, 1).unwrap();
        let r = evaluate(
            &train,
            &test,
            &"1,2,3".parse().unwrap(),
            &KnnConfig::default(),
        )
        .unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn experiment_cell_matches_direct_selection() {
        let ds = generate_synthetic(&SyntheticSpec {
            rows: 300,
            seed: 2,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let (train, test) = crate::wrapper::holdout_split(&ds, 0.3, 4).unwrap();
        let plan = ExperimentPlan {
            sizes: vec![train.n_rows()],
            seeds: vec![11],
            ..ExperimentPlan::default()
        };
        let doc = run_experiment(&plan, &train, &test).unwrap();
        assert_eq!(doc.cells.len(), 1);
        let r = doc.cells[0].result().unwrap();

        let gains = build_gain_table(&train, &plan.discretization).unwrap();
        let direct = select_features(&train, &gains, &plan.wrapper_for(11)).unwrap();
        assert_eq!(r.selected_subset, direct.final_subset);
        assert_eq!(r.trace, direct);
    }

    #[test]
    fn oversized_cell_fails_alone() {
        let ds = generate_synthetic(&SyntheticSpec {
            rows: 200,
            seed: 2,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let (train, test) = crate::wrapper::holdout_split(&ds, 0.3, 4).unwrap();
        let plan = ExperimentPlan {
            sizes: vec![100, 10_000],
            seeds: vec![1, 2],
            ..ExperimentPlan::default()
        };
        let mut doc = run_experiment(&plan, &train, &test).unwrap();
        assert_eq!(doc.cells.len(), 4);
        assert!(doc.cells[..2].iter().all(|c| c.result().is_some()));
        assert!(doc.cells[2..].iter().all(|c| c.result().is_none()));

        // dropping cells leaves the others untouched
        let small = ExperimentPlan {
            sizes: vec![100],
            seeds: vec![2],
            ..plan.clone()
        };
        let mut alone = run_experiment(&small, &train, &test).unwrap();
        doc.strip_timings();
        alone.strip_timings();
        assert_eq!(alone.cells[0], doc.cells[1]);

        let json = serde_json::to_string(&doc).unwrap();
        assert_eq!(
            serde_json::from_str::<ExperimentDocument>(&json).unwrap(),
            doc
        );
        let plan_json = serde_json::to_string(&plan).unwrap();
        assert_eq!(
            serde_json::from_str::<ExperimentPlan>(&plan_json).unwrap(),
            plan
        );
    }
}
