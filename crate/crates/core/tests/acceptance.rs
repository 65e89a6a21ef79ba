//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! (or `SKIP`) line; the test fails if any criterion fails.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use kdd_ensemble::dataset::{load_any, sample, split, LabelMap, LabelMode, SplitMode, SplitSpec};
use kdd_ensemble::entropy::{build_gain_table, class_entropy, information_gain};
use kdd_ensemble::knn::{predict, Classifier};
use kdd_ensemble::report::{generate_synthetic, SyntheticSpec};
use kdd_ensemble::wrapper::{
    compare_full_vs_selected, holdout_split, replay, select_features, EvalSplit,
};
use kdd_ensemble::{
    AttackCategory, Dataset, DiscretizationSpec, FeatureSchema, FeatureSubset, KnnConfig,
    WrapperConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAIN_TOL: f64 = 1e-12;
const GAIN_BUDGET: Duration = Duration::from_secs(10);
const KNN_BUDGET: Duration = Duration::from_secs(30);
const DIRECTIONAL_BUDGET: Duration = Duration::from_secs(120);
const REAL_BUDGET: Duration = Duration::from_secs(600);

type Check = fn() -> Verdict;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn category(i: usize) -> AttackCategory {
    AttackCategory::ALL[i % AttackCategory::COUNT]
}

// Reference gain: class entropy minus the size-weighted entropy of each bin,
// counted with hash maps straight from the definition.
fn oracle_gain(bins: &[u32], labels: &[usize]) -> f64 {
    fn h(counts: &HashMap<usize, usize>, n: usize) -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.log2()
            })
            .sum()
    }
    let n = labels.len();
    let mut overall = HashMap::new();
    let mut per_bin: HashMap<u32, HashMap<usize, usize>> = HashMap::new();
    for (&b, &l) in bins.iter().zip(labels) {
        *overall.entry(l).or_insert(0) += 1;
        *per_bin.entry(b).or_default().entry(l).or_insert(0) += 1;
    }
    let expected: f64 = per_bin
        .values()
        .map(|c| {
            let m: usize = c.values().sum();
            m as f64 / n as f64 * h(c, m)
        })
        .sum();
    h(&overall, n) - expected
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..500 {
        let rows = rng.random_range(1..=200);
        let features = rng.random_range(1..=8);
        let bins = rng.random_range(1..=6u32);
        let classes = rng.random_range(1..=5);
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        let cats: Vec<AttackCategory> = labels.iter().map(|&l| category(l)).collect();
        for _ in 0..features {
            let column: Vec<u32> = (0..rows).map(|_| rng.random_range(0..bins)).collect();
            let got = information_gain(&column, &cats).expect("gain");
            let want = oracle_gain(&column, &labels);
            worst = worst.max((got - want).abs());
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "{checked} features, max |diff| {worst:.3e} (tol {GAIN_TOL:e}), {:.2}s (limit {}s)",
        elapsed.as_secs_f64(),
        GAIN_BUDGET.as_secs()
    );
    if worst <= GAIN_TOL && elapsed < GAIN_BUDGET {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn criterion_2() -> Verdict {
    use AttackCategory::*;
    let labels = [Normal, Dos, Dos, Probe, R2l, Normal, U2r, Dos];
    let constant = vec![3u32; labels.len()];
    let g_const = information_gain(&constant, &labels).unwrap();

    let identical: Vec<u32> = labels.iter().map(|c| c.index() as u32).collect();
    let h = class_entropy(&labels).unwrap();
    let g_ident = information_gain(&identical, &labels).unwrap();

    let half = [Normal, Dos, Normal, Dos];
    let h_half = class_entropy(&half).unwrap();

    let msg = format!(
        "constant gain {g_const:e}, identical gain {g_ident} vs entropy {h} (tol {GAIN_TOL:e}), 50/50 entropy {h_half}"
    );
    if g_const == 0.0 && (g_ident - h).abs() <= GAIN_TOL && h_half == 1.0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

// Full sort by (distance, row id), then a plain majority count. Ties go to the
// category whose nearest member appears first.
fn oracle_predict(
    train: &[Vec<f64>],
    labels: &[AttackCategory],
    q: &[f64],
    k: usize,
) -> AttackCategory {
    let mut all: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d: f64 = r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d.sqrt(), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top = &all[..k.min(all.len())];
    let mut counts = [0usize; AttackCategory::COUNT];
    for &(_, i) in top {
        counts[labels[i].index()] += 1;
    }
    let max = *counts.iter().max().unwrap();
    top.iter()
        .map(|&(_, i)| labels[i])
        .find(|c| counts[c.index()] == max)
        .unwrap()
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut queries = 0;
    let mut mismatches = 0;
    for _ in 0..200 {
        let rows = rng.random_range(1..=200);
        let width = rng.random_range(1..=41);
        // a coarse grid makes distance ties common
        let coarse = rng.random_bool(0.5);
        let value = |rng: &mut ChaCha8Rng| {
            if coarse {
                f64::from(rng.random_range(0..3u8))
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let train_rows: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..width).map(|_| value(&mut rng)).collect())
            .collect();
        let labels: Vec<AttackCategory> = (0..rows)
            .map(|_| category(rng.random_range(0..5)))
            .collect();
        let train = Dataset::from_rows(
            FeatureSchema::continuous(width),
            &train_rows,
            labels.clone(),
        )
        .expect("dataset");
        let subset = FeatureSubset::all(width);
        let queries_here: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..width).map(|_| value(&mut rng)).collect())
            .collect();
        for k in [1, 3, 5, 10] {
            let clf = Classifier::new(&train, &subset, KnnConfig::with_k(k)).expect("classifier");
            for q in &queries_here {
                queries += 1;
                if clf.predict(q) != oracle_predict(&train_rows, &labels, q, k) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "{queries} queries, {mismatches} mismatches, {:.2}s (limit {}s)",
        elapsed.as_secs_f64(),
        KNN_BUDGET.as_secs()
    );
    if mismatches == 0 && elapsed < KNN_BUDGET {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn criterion_4() -> Verdict {
    // test point at the origin; two triangles at distance 1, three squares
    // further out
    let triangle = AttackCategory::Dos;
    let square = AttackCategory::Normal;
    let rows = vec![
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![-1.5, 0.0],
        vec![0.0, -1.6],
        vec![1.2, 1.2],
    ];
    let train = Dataset::from_rows(
        FeatureSchema::continuous(2),
        &rows,
        vec![triangle, triangle, square, square, square],
    )
    .unwrap();
    let s = FeatureSubset::all(2);
    let at3 = predict(&train, &[0.0, 0.0], &s, &KnnConfig::with_k(3)).unwrap();
    let at5 = predict(&train, &[0.0, 0.0], &s, &KnnConfig::with_k(5)).unwrap();
    let msg = format!("k=3 -> {at3} (triangle), k=5 -> {at5} (square)");
    if at3 == triangle && at5 == square {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn criterion_5() -> Verdict {
    let mut problems = Vec::new();
    let mut accepted_total = 0;
    for seed in 0..50u64 {
        let ds = generate_synthetic(&SyntheticSpec {
            rows: 300,
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let gains = build_gain_table(&ds, &DiscretizationSpec::default()).unwrap();
        let cfg = WrapperConfig {
            eval: EvalSplit::Holdout {
                fraction: 0.3,
                seed,
            },
            ..WrapperConfig::default()
        };
        let trace = select_features(&ds, &gains, &cfg).unwrap();

        let mut last = trace.seed_accuracy;
        for s in trace.accepted() {
            accepted_total += 1;
            if s.accuracy_after <= last {
                problems.push(format!("seed {seed}: {} after {last}", s.accuracy_after));
            }
            last = s.accuracy_after;
        }
        if last != trace.final_accuracy {
            problems.push(format!(
                "seed {seed}: final accuracy differs from last accepted"
            ));
        }

        let (fit, eval) = holdout_split(&ds, 0.3, seed).unwrap();
        let replayed = replay(&trace, &fit, &eval, &cfg.knn).unwrap();
        let recorded: Vec<f64> = std::iter::once(trace.seed_accuracy)
            .chain(trace.steps.iter().map(|s| s.accuracy_after))
            .collect();
        let same = replayed.len() == recorded.len()
            && replayed
                .iter()
                .zip(&recorded)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            problems.push(format!("seed {seed}: replay differs"));
        }
    }
    let msg = format!(
        "50 runs, {accepted_total} accepted steps, {} problems",
        problems.len()
    );
    if problems.is_empty() {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(format!("{msg}: {}", problems.join("; ")))
    }
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let informative = [1usize, 2, 3];
    let mut not_worse = 0;
    let mut all_informative = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let ds = generate_synthetic(&SyntheticSpec {
            rows: 2000,
            informative_features: 3,
            noise_features: 7,
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let (train, test) = split(
            &ds,
            &SplitSpec {
                mode: SplitMode::RandomSplit {
                    train_fraction: 0.7,
                },
                seed,
                sample_size: None,
            },
        )
        .unwrap();
        let gains = build_gain_table(&train, &DiscretizationSpec::default()).unwrap();
        let cfg = WrapperConfig {
            eval: EvalSplit::Holdout {
                fraction: 0.3,
                seed,
            },
            ..WrapperConfig::default()
        };
        let trace = select_features(&train, &gains, &cfg).unwrap();
        let cmp = compare_full_vs_selected(&train, &test, &trace, &cfg).unwrap();
        if cmp.selected.accuracy >= cmp.full.accuracy {
            not_worse += 1;
        }
        if informative.iter().all(|&f| trace.final_subset.contains(f)) {
            all_informative += 1;
        }
        detail.push(format!(
            "[{}] {:.3}/{:.3}",
            trace.final_subset, cmp.full.accuracy, cmp.selected.accuracy
        ));
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "selected >= full in {not_worse}/10, all informative kept in {all_informative}/10 (need 8 each), {:.1}s (limit {}s); subset full/selected: {}",
        elapsed.as_secs_f64(),
        DIRECTIONAL_BUDGET.as_secs(),
        detail.join(" ")
    );
    if not_worse >= 8 && all_informative >= 8 && elapsed < DIRECTIONAL_BUDGET {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn real_label_map() -> LabelMap {
    let mut labels = LabelMap::new(LabelMode::Strict);
    let extensions = std::env::var_os("KDD_LABEL_EXTENSIONS")
        .map(PathBuf::from)
        .unwrap_or_else(|| fixture("corrected_labels.txt"));
    labels
        .extend_from_path(&extensions)
        .expect("label extensions");
    labels
}

fn criterion_7() -> Verdict {
    let (Some(train_path), Some(test_path)) = (
        std::env::var_os("KDD_TRAIN_PATH"),
        std::env::var_os("KDD_TEST_PATH"),
    ) else {
        return Verdict::Skip("set KDD_TRAIN_PATH and KDD_TEST_PATH to run".into());
    };
    let start = Instant::now();
    let labels = real_label_map();
    let (train, dict) = load_any(Path::new(&train_path), None, &labels).expect("train file");
    let (test, _) = load_any(Path::new(&test_path), Some(dict), &labels).expect("test file");

    let pool = sample(&train, 10_000.min(train.n_rows()), 0).unwrap();
    let test = sample(&test, 10_000.min(test.n_rows()), 0).unwrap();
    let gains = build_gain_table(&pool, &DiscretizationSpec::default()).unwrap();
    let g20 = gains.gain(20).unwrap();

    let cfg = WrapperConfig::default();
    let trace = select_features(&pool, &gains, &cfg).unwrap();
    let cmp = compare_full_vs_selected(&pool, &test, &trace, &cfg).unwrap();
    let worst_rank = trace
        .final_subset
        .indices()
        .iter()
        .map(|&f| gains.rank_of(f).unwrap())
        .max()
        .unwrap();
    let elapsed = start.elapsed();
    let msg = format!(
        "feature 20 gain {g20:e}; full {:.4} -> selected {:.4} with [{}]; worst rank {worst_rank} (limit 15); {:.0}s (limit {}s)",
        cmp.full.accuracy,
        cmp.selected.accuracy,
        trace.final_subset,
        elapsed.as_secs_f64(),
        REAL_BUDGET.as_secs()
    );
    if g20 == 0.0
        && cmp.selected.accuracy > cmp.full.accuracy
        && worst_rank <= 15
        && elapsed < REAL_BUDGET
    {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kdd-ensemble"))
        .args(args)
        .output()
        .expect("spawn cli")
}

// Runs every subcommand into `dir` and returns the produced files.
fn cli_outputs(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let fixture_train = fixture("kdd_sample.txt").to_string_lossy().into_owned();
    let data = p("synth.csv");
    let steps: Vec<Vec<String>> = vec![
        vec!["synth", "--rows", "600", "--seed", "7", "--out", &data],
        vec![
            "gain",
            "--train",
            &data,
            "--out",
            &p("gain.csv"),
            "--ranking-out",
            &p("rank.csv"),
        ],
        vec![
            "select",
            "--train",
            &data,
            "--split",
            "random",
            "--seed",
            "7",
            "--out",
            &p("trace.json"),
            "--log",
            &p("trace.log"),
            "--compare",
        ],
        vec![
            "eval",
            "--train",
            &data,
            "--split",
            "random",
            "--seed",
            "7",
            "--features",
            "1,2,3",
            "--format",
            "csv",
            "--out",
            &p("eval.csv"),
        ],
        vec![
            "experiment",
            "--train",
            &data,
            "--split",
            "random",
            "--seeds",
            "1,2",
            "--sizes",
            "200,400",
            "--out-dir",
            &p("exp"),
        ],
        vec![
            "gain",
            "--train",
            &fixture_train,
            "--out",
            &p("fixture_gain.csv"),
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    let mut outputs = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let mut args: Vec<&str> = vec!["--threads", threads];
        args.extend(step.iter().map(String::as_str));
        let out = run_cli(&args);
        assert!(
            out.status.success(),
            "step {i} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((format!("stdout of step {i}"), out.stdout));
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in walk(dir) {
        files.push(entry);
    }
    files.sort();
    for f in files {
        let name = f.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        outputs.push((name, std::fs::read(&f).unwrap()));
    }
    outputs
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn criterion_8() -> Verdict {
    let runs: Vec<Vec<(String, Vec<u8>)>> = ["1", "4", "1", "2"]
        .iter()
        .map(|t| {
            let dir = tempfile::tempdir().unwrap();
            cli_outputs(dir.path(), t)
        })
        .collect();
    let reference = &runs[0];
    let mut diffs = Vec::new();
    for (i, run) in runs.iter().enumerate().skip(1) {
        if run.len() != reference.len() {
            diffs.push(format!("run {i} produced {} outputs", run.len()));
            continue;
        }
        for ((name, a), (_, b)) in reference.iter().zip(run) {
            if a != b {
                diffs.push(format!("run {i}: {name}"));
            }
        }
    }
    let msg = format!(
        "{} runs at --threads 1,4,1,2, {} outputs each, {} differences",
        runs.len(),
        reference.len(),
        diffs.len()
    );
    if diffs.is_empty() {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(format!("{msg}: {}", diffs.join(", ")))
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check); 8] = [
        ("1 gain oracle", criterion_1),
        ("2 gain anchors", criterion_2),
        ("3 knn oracle", criterion_3),
        ("4 two-radius flip", criterion_4),
        ("5 wrapper monotonicity and replay", criterion_5),
        ("6 synthetic direction", criterion_6),
        ("7 real data", criterion_7),
        ("8 cli determinism", criterion_8),
    ];
    let mut failed = Vec::new();
    println!();
    for (name, check) in criteria {
        match check() {
            Verdict::Pass(m) => println!("PASS criterion {name}: {m}"),
            Verdict::Skip(m) => println!("SKIP criterion {name}: {m}"),
            Verdict::Fail(m) => {
                println!("FAIL criterion {name}: {m}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
