//! Command-line front end: `gain`, `select`, `eval`, `experiment`, `synth`.
//!
//! Results go to `--out` (or stdout); diagnostics go to stderr. Exit status
//! is 0 on success, 1 on a runtime failure and 2 on a usage error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    load_any, load_partitions, min_max_stats, normalize, sample, write_canonical, AttackCategory,
    Dataset, LabelMap, LabelMode, SplitMode, SplitSpec,
};
use crate::entropy::{build_gain_table, DiscretizationMethod, DiscretizationSpec};
use crate::error::Error;
use crate::knn::{evaluate, FeatureSubset, KnnConfig, Metric, Weighting};
use crate::report::{
    emit_comparison, emit_gain_ranking, emit_gain_report, emit_plot_data, generate_synthetic,
    run_experiment, ExperimentPlan, SyntheticLayout, SyntheticSpec, DEFAULT_SIZES,
};
use crate::wrapper::{
    compare_full_vs_selected, select_features, select_features_with, EvalSplit, RankOrder,
    WrapperConfig,
};

/// Relative data paths that do not exist are looked up here.
pub const DATA_DIR_ENV: &str = "KDD_ENSEMBLE_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "kdd-ensemble",
    version,
    about = "Information-gain filter + KNN wrapper feature selection for KDD-99 records"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank features by information gain on the training file.
    Gain(GainCmd),
    /// Run the gain-ordered forward selection and print the chosen subset.
    Select(SelectCmd),
    /// KNN accuracy of one feature subset on the test set.
    Eval(EvalCmd),
    /// Size sweep: full vs. selected-feature accuracy per sample size and seed.
    Experiment(ExperimentCmd),
    /// Write a synthetic labelled dataset.
    Synth(SynthCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    TwoFiles,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelModeArg {
    Strict,
    Permissive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CategoryArg {
    Normal,
    Dos,
    Probe,
    R2l,
    U2r,
}

impl From<CategoryArg> for AttackCategory {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::Normal => AttackCategory::Normal,
            CategoryArg::Dos => AttackCategory::Dos,
            CategoryArg::Probe => AttackCategory::Probe,
            CategoryArg::R2l => AttackCategory::R2l,
            CategoryArg::U2r => AttackCategory::U2r,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    EqualFrequency,
    EqualWidth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WrapperEvalArg {
    /// Score candidates on a random holdout of the training data.
    Holdout,
    /// Score candidates on the test set itself.
    Test,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthFormat {
    /// Encoded header + numeric rows.
    Canonical,
    /// Raw 42-field records (needs the 41-column layout).
    Kdd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    Generic,
    Kdd99,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// How to treat attack names missing from the label tables.
    #[arg(long, value_enum, default_value = "strict")]
    label_mode: LabelModeArg,

    /// Category for unknown names in permissive mode.
    #[arg(long, value_enum, default_value = "dos")]
    fallback_category: CategoryArg,

    /// Extra `attack_name,category` pairs, one per line.
    #[arg(long)]
    label_extensions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Training records (raw 42-field lines or the canonical encoded form).
    #[arg(long)]
    train: PathBuf,

    /// Test records. Implies --split two-files.
    #[arg(long)]
    test: Option<PathBuf>,

    /// two-files when --test is given, random otherwise.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,

    /// Training share for --split random.
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,

    /// Cap on records drawn from each input.
    #[arg(long)]
    sample_size: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Min-max scale features using training-set statistics.
    #[arg(long)]
    normalize: bool,

    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct BinArgs {
    /// Bins per continuous feature.
    #[arg(long, default_value_t = 10)]
    bins: usize,

    /// Binning of continuous features.
    #[arg(long, value_enum, default_value = "equal-frequency")]
    discretization: MethodArg,
}

#[derive(Debug, Args)]
struct KnnArgs {
    /// Neighbors consulted per prediction.
    #[arg(long, default_value_t = 10)]
    k: usize,

    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,

    #[arg(long, value_enum, default_value = "uniform")]
    weighting: WeightingArg,
}

#[derive(Debug, Args)]
struct WrapperArgs {
    /// Where candidate subsets are scored.
    #[arg(long, value_enum, default_value = "holdout")]
    wrapper_eval: WrapperEvalArg,

    /// Share of the training data held out for scoring.
    #[arg(long, default_value_t = 0.3)]
    holdout_fraction: f64,

    /// Direction of the gain ranking walk.
    #[arg(long, value_enum, default_value = "descending")]
    order: OrderArg,

    /// Minimum accuracy gain for accepting a feature.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,

    /// Stop after this many consecutive rejections (default: never).
    #[arg(long)]
    patience: Option<usize>,

    /// Largest subset size (default: no cap).
    #[arg(long)]
    max_features: Option<usize>,
}

#[derive(Debug, Args)]
struct GainCmd {
    /// Training records.
    #[arg(long)]
    train: PathBuf,

    /// Score a random sample of this many records.
    #[arg(long)]
    sample_size: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    bins: BinArgs,

    #[command(flatten)]
    labels: LabelArgs,

    /// Per-feature CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the rank-ordered view here.
    #[arg(long)]
    ranking_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bins: BinArgs,
    #[command(flatten)]
    knn: KnnArgs,
    #[command(flatten)]
    wrapper: WrapperArgs,

    /// Selection trace as JSON.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Human-readable step log (default: stderr).
    #[arg(long)]
    log: Option<PathBuf>,

    /// Also report test accuracy with all vs. selected features.
    #[arg(long)]
    compare: bool,
}

#[derive(Debug, Args)]
struct EvalCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    knn: KnnArgs,

    /// Comma-separated 1-based feature indices (default: all).
    #[arg(long)]
    features: Option<String>,

    #[arg(long, value_enum, default_value = "json")]
    format: EvalFormat,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bins: BinArgs,
    #[command(flatten)]
    knn: KnnArgs,
    #[command(flatten)]
    wrapper: WrapperArgs,

    /// Sample sizes [default: 1000,10000,50000,100000,150000,250000].
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,

    /// Seeds, one cell per size and seed (default: --seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// Cap on test records per cell.
    #[arg(long)]
    test_size: Option<usize>,

    /// Load the plan from a JSON file instead of the flags above.
    #[arg(long)]
    plan: Option<PathBuf>,

    /// Write experiment.json, comparison.csv and plot.dat here
    /// (default: comparison CSV on stdout).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Keep wall-clock timings in experiment.json.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct SynthCmd {
    #[arg(long, default_value_t = 2000)]
    rows: usize,

    #[arg(long, default_value_t = 3)]
    informative: usize,

    #[arg(long, default_value_t = 7)]
    noise: usize,

    /// Category shares in the order Normal,DOS,Probe,R2L,U2R.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.2,0.2,0.2,0.2")]
    proportions: Vec<f64>,

    /// Gap between class means on informative features.
    #[arg(long, default_value_t = 1.0)]
    separation: f64,

    /// Standard deviation of noise features.
    #[arg(long, default_value_t = 3.0)]
    noise_scale: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value = "generic")]
    layout: LayoutArg,

    #[arg(long, value_enum, default_value = "canonical")]
    format: SynthFormat,

    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Runtime(Error::invalid(e.to_string()))),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gain(c) => cmd_gain(c),
        Command::Select(c) => cmd_select(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Experiment(c) => cmd_experiment(c),
        Command::Synth(c) => cmd_synth(c),
    }
}

fn resolve_input(path: &Path) -> CliResult<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(usage(format!(
        "input file {} does not exist",
        path.display()
    )))
}

fn label_map(args: &LabelArgs) -> CliResult<LabelMap> {
    let mode = match args.label_mode {
        LabelModeArg::Strict => LabelMode::Strict,
        LabelModeArg::Permissive => LabelMode::Permissive {
            fallback: args.fallback_category.into(),
        },
    };
    let mut map = LabelMap::new(mode);
    if let Some(p) = &args.label_extensions {
        map.extend_from_path(&resolve_input(p)?)?;
    }
    Ok(map)
}

fn discretization(args: &BinArgs) -> CliResult<DiscretizationSpec> {
    let spec = DiscretizationSpec {
        method: match args.discretization {
            MethodArg::EqualFrequency => DiscretizationMethod::EqualFrequency,
            MethodArg::EqualWidth => DiscretizationMethod::EqualWidth,
        },
        bins: args.bins,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn knn_config(args: &KnnArgs) -> CliResult<KnnConfig> {
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    Ok(KnnConfig {
        k: args.k,
        metric: match args.metric {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Manhattan => Metric::Manhattan,
        },
        weighting: match args.weighting {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::InverseDistance => Weighting::InverseDistance,
        },
    })
}

fn wrapper_config(args: &WrapperArgs, knn: KnnConfig, seed: u64) -> CliResult<WrapperConfig> {
    if !(args.holdout_fraction > 0.0 && args.holdout_fraction < 1.0) {
        return Err(usage("--holdout-fraction must lie in (0, 1)"));
    }
    Ok(WrapperConfig {
        max_features: args.max_features,
        knn,
        epsilon: args.epsilon,
        eval: match args.wrapper_eval {
            WrapperEvalArg::Holdout => EvalSplit::Holdout {
                fraction: args.holdout_fraction,
                seed,
            },
            WrapperEvalArg::Test => EvalSplit::Provided,
        },
        order: match args.order {
            OrderArg::Descending => RankOrder::Descending,
            OrderArg::Ascending => RankOrder::Ascending,
        },
        patience: args.patience,
    })
}

fn load_data(args: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    let mode = match (args.split, &args.test) {
        (Some(SplitArg::Random), Some(_)) => {
            return Err(usage("--test cannot be combined with --split random"))
        }
        (Some(SplitArg::TwoFiles), None) => return Err(usage("--split two-files needs --test")),
        (_, Some(_)) => SplitMode::TwoFiles,
        (_, None) => {
            if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
                return Err(usage("--train-fraction must lie in (0, 1)"));
            }
            SplitMode::RandomSplit {
                train_fraction: args.train_fraction,
            }
        }
    };
    let train = resolve_input(&args.train)?;
    let test = args.test.as_deref().map(resolve_input).transpose()?;
    let labels = label_map(&args.labels)?;
    let spec = SplitSpec {
        mode,
        seed: args.seed,
        sample_size: args.sample_size,
    };
    let (mut train, mut test) = load_partitions(&train, test.as_deref(), &spec, &labels)?;
    if args.normalize {
        let stats = min_max_stats(&train)?;
        train = normalize(&train, &stats)?;
        test = normalize(&test, &stats)?;
    }
    eprintln!(
        "loaded {} training and {} test records",
        train.n_rows(),
        test.n_rows()
    );
    Ok((train, test))
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|source| Error::File {
                path: p.to_path_buf(),
                source,
            })?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, mut out: impl Write) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_gain(c: GainCmd) -> CliResult<()> {
    let spec = discretization(&c.bins)?;
    let labels = label_map(&c.labels)?;
    let path = resolve_input(&c.train)?;
    let (mut train, _) = load_any(&path, None, &labels)?;
    if let Some(n) = c.sample_size {
        if n < train.n_rows() {
            train = sample(&train, n, c.seed)?;
        }
    }
    eprintln!(
        "scoring {} features over {} records",
        train.n_features(),
        train.n_rows()
    );
    let gains = build_gain_table(&train, &spec)?;
    emit_gain_report(&gains, open_out(c.out.as_deref())?)?;
    if let Some(p) = &c.ranking_out {
        emit_gain_ranking(&gains, open_out(Some(p))?)?;
    }
    Ok(())
}

fn cmd_select(c: SelectCmd) -> CliResult<()> {
    let spec = discretization(&c.bins)?;
    let knn = knn_config(&c.knn)?;
    let cfg = wrapper_config(&c.wrapper, knn, c.data.seed)?;
    let (train, test) = load_data(&c.data)?;
    let gains = build_gain_table(&train, &spec)?;
    let trace = match cfg.eval {
        EvalSplit::Provided => select_features_with(&train, &test, &gains, &cfg)?,
        EvalSplit::Holdout { .. } => select_features(&train, &gains, &cfg)?,
    };
    match &c.log {
        Some(p) => fs::write(p, trace.step_log()).map_err(|source| Error::File {
            path: p.clone(),
            source,
        })?,
        None => eprint!("{}", trace.step_log()),
    }
    if let Some(p) = &c.out {
        write_json(&trace, open_out(Some(p))?)?;
    }
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", trace.final_subset)?;
    if c.compare {
        let cmp = compare_full_vs_selected(&train, &test, &trace, &cfg)?;
        writeln!(
            stdout,
            "all {} features: {}  selected: {}",
            train.n_features(),
            crate::report::percent(cmp.full.accuracy),
            crate::report::percent(cmp.selected.accuracy)
        )?;
    }
    Ok(())
}

fn cmd_eval(c: EvalCmd) -> CliResult<()> {
    let knn = knn_config(&c.knn)?;
    let (train, test) = load_data(&c.data)?;
    let subset = match &c.features {
        Some(s) => {
            let parsed: FeatureSubset = s.parse().map_err(|e: Error| usage(e.to_string()))?;
            FeatureSubset::new(parsed.into(), train.n_features())
                .map_err(|e| usage(e.to_string()))?
        }
        None => FeatureSubset::all(train.n_features()),
    };
    let mut report = evaluate(&train, &test, &subset, &knn)?;
    if let Some(secs) = report.elapsed_secs.take() {
        eprintln!("evaluated {} records in {secs:.3}s", report.total);
    }
    let mut out = open_out(c.out.as_deref())?;
    match c.format {
        EvalFormat::Json => write_json(&report, out)?,
        EvalFormat::Csv => {
            writeln!(out, "{}", crate::knn::EvaluationReport::CSV_HEADER)?;
            writeln!(out, "{}", report.csv_row())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn cmd_experiment(c: ExperimentCmd) -> CliResult<()> {
    let plan = match &c.plan {
        Some(p) => {
            let text = fs::read_to_string(resolve_input(p)?)?;
            let plan: ExperimentPlan =
                serde_json::from_str(&text).map_err(|e| usage(format!("plan: {e}")))?;
            plan.validate().map_err(|e| usage(e.to_string()))?;
            plan
        }
        None => {
            let knn = knn_config(&c.knn)?;
            let plan = ExperimentPlan {
                sizes: if c.sizes.is_empty() {
                    DEFAULT_SIZES.to_vec()
                } else {
                    c.sizes.clone()
                },
                seeds: if c.seeds.is_empty() {
                    vec![c.data.seed]
                } else {
                    c.seeds.clone()
                },
                discretization: discretization(&c.bins)?,
                knn,
                wrapper: wrapper_config(&c.wrapper, knn, c.data.seed)?,
                test_size: c.test_size,
            };
            plan.validate().map_err(|e| usage(e.to_string()))?;
            plan
        }
    };
    let (train, test) = load_data(&c.data)?;
    let mut doc = run_experiment(&plan, &train, &test)?;
    for cell in &doc.cells {
        if let crate::report::CellOutcome::Failed { error } = &cell.outcome {
            eprintln!("cell size={} seed={} failed: {error}", cell.size, cell.seed);
        }
    }
    if !c.timings {
        doc.strip_timings();
    }
    match &c.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| Error::File {
                path: dir.clone(),
                source,
            })?;
            write_json(&doc, open_out(Some(&dir.join("experiment.json")))?)?;
            emit_comparison(&doc, open_out(Some(&dir.join("comparison.csv")))?)?;
            emit_plot_data(&doc, open_out(Some(&dir.join("plot.dat")))?)?;
        }
        None => emit_comparison(&doc, open_out(None)?)?,
    }
    Ok(())
}

fn cmd_synth(c: SynthCmd) -> CliResult<()> {
    let proportions: [f64; AttackCategory::COUNT] = c
        .proportions
        .as_slice()
        .try_into()
        .map_err(|_| usage("--proportions needs exactly 5 values"))?;
    let layout = match c.layout {
        LayoutArg::Generic => SyntheticLayout::Generic,
        LayoutArg::Kdd99 => SyntheticLayout::Kdd99,
    };
    let spec = SyntheticSpec {
        rows: c.rows,
        informative_features: c.informative,
        noise_features: c.noise,
        class_proportions: proportions,
        separation: c.separation,
        noise_scale: c.noise_scale,
        seed: c.seed,
        layout,
    };
    let ds = generate_synthetic(&spec).map_err(|e| usage(e.to_string()))?;
    let mut out = open_out(c.out.as_deref())?;
    match c.format {
        SynthFormat::Canonical => write_canonical(&ds, &mut out)?,
        SynthFormat::Kdd => {
            if ds.n_features() != 41 {
                return Err(usage("--format kdd needs --layout kdd99"));
            }
            ds.write_kdd(&mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}
