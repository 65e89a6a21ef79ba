//! KDD-99 connection records: schema, label categories, parsing, encoding,
//! sampling and train/test partitioning.
//!
//! A raw record is 41 comma-separated features followed by an attack label
//! (usually with a trailing `.`). Symbolic features are turned into integer
//! codes through a [`CategoryDictionary`] that callers thread through every
//! file they parse so that train and test share one encoding.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Continuous,
    Discrete,
}

impl FeatureKind {
    pub fn code(self) -> char {
        match self {
            FeatureKind::Continuous => 'C',
            FeatureKind::Discrete => 'D',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    /// 1-based column position.
    pub index: usize,
    pub name: String,
    pub kind: FeatureKind,
}

/// Ordered feature descriptors. The label is always the column after the
/// last feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

const KDD99_FEATURES: [(&str, FeatureKind); 41] = {
    use FeatureKind::{Continuous as C, Discrete as D};
    [
        ("duration", C),
        ("protocol_type", D),
        ("service", D),
        ("flag", D),
        ("src_bytes", C),
        ("dst_bytes", C),
        ("land", D),
        ("wrong_fragment", C),
        ("urgent", C),
        ("hot", C),
        ("num_failed_logins", C),
        ("logged_in", D),
        ("num_compromised", C),
        ("root_shell", C),
        ("su_attempted", C),
        ("num_root", C),
        ("num_file_creations", C),
        ("num_shells", C),
        ("num_access_files", C),
        ("num_outbound_cmds", C),
        ("is_host_login", D),
        ("is_guest_login", D),
        ("count", C),
        ("srv_count", C),
        ("serror_rate", C),
        ("srv_serror_rate", C),
        ("rerror_rate", C),
        ("srv_rerror_rate", C),
        ("same_srv_rate", C),
        ("diff_srv_rate", C),
        ("srv_diff_host_rate", C),
        ("dst_host_count", C),
        ("dst_host_srv_count", C),
        ("dst_host_same_srv_rate", C),
        ("dst_host_diff_srv_rate", C),
        ("dst_host_same_src_port_rate", C),
        ("dst_host_srv_diff_host_rate", C),
        ("dst_host_serror_rate", C),
        ("dst_host_srv_serror_rate", C),
        ("dst_host_rerror_rate", C),
        ("dst_host_srv_rerror_rate", C),
    ]
};

impl FeatureSchema {
    /// Builds a schema from `(name, kind)` pairs, numbering them 1..=n.
    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = (S, FeatureKind)>) -> Self {
        let features = features
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind))| FeatureDescriptor {
                index: i + 1,
                name: name.into(),
                kind,
            })
            .collect();
        FeatureSchema { features }
    }

    /// The standard 41-feature connection record layout.
    pub fn kdd99() -> Self {
        Self::new(KDD99_FEATURES.iter().map(|&(n, k)| (n, k)))
    }

    /// `n` continuous features named `f1..fn`.
    pub fn continuous(n: usize) -> Self {
        Self::new((1..=n).map(|i| (format!("f{i}"), FeatureKind::Continuous)))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    /// Descriptor for a 1-based feature index.
    pub fn feature(&self, index: usize) -> Option<&FeatureDescriptor> {
        index.checked_sub(1).and_then(|i| self.features.get(i))
    }

    /// Zero-based column of the class label in a raw record.
    pub fn label_position(&self) -> usize {
        self.features.len()
    }
}

/// The five label categories, in the fixed order used for tie-breaking and
/// for confusion matrix rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttackCategory {
    Normal,
    #[serde(rename = "DOS")]
    Dos,
    Probe,
    #[serde(rename = "R2L")]
    R2l,
    #[serde(rename = "U2R")]
    U2r,
}

impl AttackCategory {
    pub const ALL: [AttackCategory; 5] = [
        AttackCategory::Normal,
        AttackCategory::Dos,
        AttackCategory::Probe,
        AttackCategory::R2l,
        AttackCategory::U2r,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackCategory::Normal => "Normal",
            AttackCategory::Dos => "DOS",
            AttackCategory::Probe => "Probe",
            AttackCategory::R2l => "R2L",
            AttackCategory::U2r => "U2R",
        }
    }

    /// One attack name per category, used when writing generated records.
    pub fn representative_label(self) -> &'static str {
        match self {
            AttackCategory::Normal => "normal",
            AttackCategory::Dos => "smurf",
            AttackCategory::Probe => "satan",
            AttackCategory::R2l => "guess_passwd",
            AttackCategory::U2r => "buffer_overflow",
        }
    }
}

impl fmt::Display for AttackCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(AttackCategory::Normal),
            "dos" => Ok(AttackCategory::Dos),
            "probe" | "prob" | "probing" => Ok(AttackCategory::Probe),
            "r2l" => Ok(AttackCategory::R2l),
            "u2r" => Ok(AttackCategory::U2r),
            other => Err(Error::invalid(format!("unknown attack category `{other}`"))),
        }
    }
}

/// Attack names of the 10% training file and their categories.
const TABLE_ONE: [(&str, AttackCategory); 23] = {
    use AttackCategory::*;
    [
        ("smurf", Dos),
        ("neptune", Dos),
        ("back", Dos),
        ("teardrop", Dos),
        ("pod", Dos),
        ("land", Dos),
        ("normal", Normal),
        ("satan", Probe),
        ("ipsweep", Probe),
        ("portsweep", Probe),
        ("nmap", Probe),
        ("warezclient", R2l),
        ("guess_passwd", R2l),
        ("warezmaster", R2l),
        ("imap", R2l),
        ("ftp_write", R2l),
        ("multihop", R2l),
        ("phf", R2l),
        ("spy", R2l),
        ("buffer_overflow", U2r),
        ("rootkit", U2r),
        ("loadmodule", U2r),
        ("perl", U2r),
    ]
};

/// What to do with a label that is neither in the built-in table nor in an
/// extension table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Strict,
    Permissive {
        fallback: AttackCategory,
    },
}

/// Attack name to category lookup.
#[derive(Debug, Clone)]
pub struct LabelMap {
    table: HashMap<String, AttackCategory>,
    mode: LabelMode,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self::new(LabelMode::Strict)
    }
}

impl LabelMap {
    pub fn new(mode: LabelMode) -> Self {
        let table = TABLE_ONE
            .iter()
            .map(|&(name, cat)| (name.to_string(), cat))
            .collect();
        LabelMap { table, mode }
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn known_labels(&self) -> usize {
        self.table.len()
    }

    /// Adds `attack_name,category` pairs, one per line. Blank lines and lines
    /// starting with `#` are ignored. Later entries override earlier ones.
    pub fn extend_from_reader<R: Read>(&mut self, reader: R) -> Result<()> {
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, cat) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(i + 1, "expected `attack_name,category`"))?;
            let cat: AttackCategory = cat
                .parse()
                .map_err(|e| Error::parse(i + 1, format!("{e}")))?;
            self.table.insert(normalize_label(name).to_string(), cat);
        }
        Ok(())
    }

    pub fn extend_from_path(&mut self, path: &Path) -> Result<()> {
        let file = File::open(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        self.extend_from_reader(file)
    }

    pub fn insert(&mut self, name: &str, category: AttackCategory) {
        self.table
            .insert(normalize_label(name).to_string(), category);
    }

    pub fn map(&self, name: &str) -> Result<AttackCategory> {
        let key = normalize_label(name);
        if let Some(&cat) = self.table.get(key.as_str()) {
            return Ok(cat);
        }
        match self.mode {
            LabelMode::Strict => Err(Error::UnknownLabel(key)),
            LabelMode::Permissive { fallback } => Ok(fallback),
        }
    }
}

fn normalize_label(name: &str) -> String {
    let name = name.trim();
    name.strip_suffix('.')
        .unwrap_or(name)
        .trim()
        .to_ascii_lowercase()
}

/// Maps an attack name to its category using the built-in table only.
pub fn map_attack_label(name: &str) -> Result<AttackCategory> {
    LabelMap::default().map(name)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TokenCodes {
    tokens: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl TokenCodes {
    fn encode(&mut self, token: &str) -> u32 {
        if let Some(&code) = self.lookup.get(token) {
            return code;
        }
        let code = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.lookup.insert(token.to_string(), code);
        code
    }
}

/// Per discrete feature, symbolic token to integer code, assigned in
/// first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryDictionary {
    features: BTreeMap<usize, TokenCodes>,
}

impl CategoryDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the code for `token` in feature `index` (1-based), assigning
    /// the next free code if the token is new.
    pub fn encode(&mut self, index: usize, token: &str) -> u32 {
        self.features.entry(index).or_default().encode(token)
    }

    pub fn code(&self, index: usize, token: &str) -> Option<u32> {
        self.features.get(&index)?.lookup.get(token).copied()
    }

    pub fn decode(&self, index: usize, code: u32) -> Option<&str> {
        self.features
            .get(&index)?
            .tokens
            .get(code as usize)
            .map(String::as_str)
    }

    /// Number of distinct tokens seen for a feature.
    pub fn len(&self, index: usize) -> usize {
        self.features.get(&index).map_or(0, |c| c.tokens.len())
    }

    pub fn is_empty(&self) -> bool {
        self.features.values().all(|c| c.tokens.is_empty())
    }

    pub fn tokens(&self, index: usize) -> &[String] {
        self.features.get(&index).map_or(&[], |c| &c.tokens)
    }
}

/// Encoded records. Values are stored row-major; each row also carries a
/// canonical key (its position in the source file) which is what
/// nearest-neighbor tie-breaking orders by.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    values: Vec<f64>,
    labels: Vec<AttackCategory>,
    raw_labels: Vec<String>,
    row_ids: Vec<u64>,
    dictionary: CategoryDictionary,
}

impl Dataset {
    /// `values` is row-major with `schema.len()` columns.
    pub fn new(
        schema: FeatureSchema,
        values: Vec<f64>,
        labels: Vec<AttackCategory>,
        raw_labels: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let row_ids = (0..n as u64).collect();
        Self::with_row_ids(schema, values, labels, raw_labels, row_ids)
    }

    pub fn with_row_ids(
        schema: FeatureSchema,
        values: Vec<f64>,
        labels: Vec<AttackCategory>,
        raw_labels: Vec<String>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} values do not fill {} rows of {} features",
                values.len(),
                n,
                schema.len()
            )));
        }
        if raw_labels.len() != n || row_ids.len() != n {
            return Err(Error::SchemaMismatch(format!(
                "{n} labels but {} raw labels and {} row ids",
                raw_labels.len(),
                row_ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {} column {}",
                pos / schema.len().max(1),
                pos % schema.len().max(1) + 1
            )));
        }
        Ok(Dataset {
            schema,
            values,
            labels,
            raw_labels,
            row_ids,
            dictionary: CategoryDictionary::new(),
        })
    }

    /// Convenience constructor from row vectors; raw labels are the
    /// representative attack name of each category.
    pub fn from_rows(
        schema: FeatureSchema,
        rows: &[Vec<f64>],
        labels: Vec<AttackCategory>,
    ) -> Result<Self> {
        let width = schema.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::SchemaMismatch(format!(
                "row {bad} has {} values, schema has {width}",
                rows[bad].len()
            )));
        }
        let values = rows.iter().flatten().copied().collect();
        let raw = labels
            .iter()
            .map(|c| c.representative_label().to_string())
            .collect();
        Self::new(schema, values, labels, raw)
    }

    pub fn with_dictionary(mut self, dictionary: CategoryDictionary) -> Self {
        self.dictionary = dictionary;
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn dictionary(&self) -> &CategoryDictionary {
        &self.dictionary
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.schema.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero width
        let w = self.schema.len().max(1);
        self.values.chunks_exact(w).take(self.labels.len())
    }

    /// Values of a 1-based feature, in row order.
    pub fn column(&self, index: usize) -> Vec<f64> {
        let w = self.schema.len();
        let j = index - 1;
        (0..self.n_rows()).map(|i| self.values[i * w + j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[AttackCategory] {
        &self.labels
    }

    pub fn raw_labels(&self) -> &[String] {
        &self.raw_labels
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn category_counts(&self) -> [usize; AttackCategory::COUNT] {
        let mut counts = [0; AttackCategory::COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order. Row keys,
    /// schema and dictionary carry over.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let w = self.schema.len();
        let mut values = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            raw_labels: rows.iter().map(|&r| self.raw_labels[r].clone()).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            dictionary: self.dictionary.clone(),
        }
    }

    /// Writes records back out in the raw comma-separated layout, decoding
    /// discrete codes through the dictionary where possible.
    pub fn write_kdd<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let desc = &self.schema.features[j];
                let token = match desc.kind {
                    FeatureKind::Discrete => self
                        .dictionary
                        .decode(desc.index, *v as u32)
                        .map(str::to_string),
                    FeatureKind::Continuous => None,
                };
                match token {
                    Some(t) => write!(out, "{t},")?,
                    None => write!(out, "{v},")?,
                }
            }
            writeln!(out, "{}.", self.raw_labels[i])?;
        }
        Ok(())
    }
}

/// Parses raw records from a reader. See [`parse_kdd_file`].
pub fn parse_kdd_reader<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    dictionary: Option<CategoryDictionary>,
    labels: &LabelMap,
) -> Result<(Dataset, CategoryDictionary)> {
    let mut dict = dictionary.unwrap_or_default();
    let width = schema.len();
    let mut values = Vec::new();
    let mut cats = Vec::new();
    let mut raw = Vec::new();

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width + 1 {
            return Err(Error::parse(
                lineno,
                format!("expected {} fields, found {}", width + 1, fields.len()),
            ));
        }
        for (desc, token) in schema.features.iter().zip(&fields) {
            let v = match desc.kind {
                FeatureKind::Discrete => f64::from(dict.encode(desc.index, token)),
                FeatureKind::Continuous => match token.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::parse(
                            lineno,
                            format!(
                                "feature {} ({}): `{token}` is not numeric",
                                desc.index, desc.name
                            ),
                        ))
                    }
                },
            };
            values.push(v);
        }
        let label = fields[width];
        let cat = labels.map(label).map_err(|e| match e {
            Error::UnknownLabel(name) => {
                Error::parse(lineno, format!("unknown attack label `{name}`"))
            }
            other => other,
        })?;
        cats.push(cat);
        raw.push(normalize_label(label));
    }

    let ds = Dataset::new(schema.clone(), values, cats, raw)?.with_dictionary(dict.clone());
    Ok((ds, dict))
}

/// Reads a raw record file. Passing the dictionary returned by an earlier
/// call keeps codes consistent across files; new tokens get fresh codes and
/// existing codes never change.
pub fn parse_kdd_file(
    path: &Path,
    schema: &FeatureSchema,
    dictionary: Option<CategoryDictionary>,
    labels: &LabelMap,
) -> Result<(Dataset, CategoryDictionary)> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kdd_reader(file, schema, dictionary, labels)
}

const ROW_ID: &str = "row_id";

/// Writes the canonical encoded form: a header of `name:C|D` columns framed
/// by `row_id` and `category,label`, then one numeric row per record.
/// Numbers use the shortest representation that parses back to the same
/// bits.
pub fn write_canonical<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ROW_ID.to_string()];
    header.extend(
        ds.schema
            .features
            .iter()
            .map(|f| format!("{}:{}", f.name, f.kind.code())),
    );
    header.push("category".into());
    header.push("label".into());
    w.write_record(&header)?;

    let mut record = Vec::with_capacity(header.len());
    for (i, row) in ds.rows().enumerate() {
        record.clear();
        record.push(ds.row_ids[i].to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(ds.labels[i].to_string());
        record.push(ds.raw_labels[i].clone());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// True when the first line looks like a canonical header.
pub fn is_canonical_header(first_line: &str) -> bool {
    first_line
        .trim_start_matches('\u{feff}')
        .split(',')
        .next()
        .is_some_and(|f| f.trim() == ROW_ID)
}

pub fn read_canonical<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || header.get(0) != Some(ROW_ID) {
        return Err(Error::parse(1, "missing canonical header"));
    }
    let n_feat = header.len() - 3;
    let mut features = Vec::with_capacity(n_feat);
    for col in header.iter().skip(1).take(n_feat) {
        let (name, kind) = col
            .rsplit_once(':')
            .ok_or_else(|| Error::parse(1, format!("column `{col}` lacks a :C or :D kind")))?;
        let kind = match kind {
            "C" => FeatureKind::Continuous,
            "D" => FeatureKind::Discrete,
            other => return Err(Error::parse(1, format!("unknown feature kind `{other}`"))),
        };
        features.push((name.to_string(), kind));
    }
    let schema = FeatureSchema::new(features);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    let mut ids = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let lineno = i + 2;
        let rec = rec?;
        if rec.len() != n_feat + 3 {
            return Err(Error::parse(
                lineno,
                format!("expected {} fields, found {}", n_feat + 3, rec.len()),
            ));
        }
        ids.push(
            rec[0]
                .parse::<u64>()
                .map_err(|_| Error::parse(lineno, "row_id is not an integer"))?,
        );
        for j in 0..n_feat {
            let v = rec[j + 1]
                .parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("`{}` is not numeric", &rec[j + 1])))?;
            values.push(v);
        }
        labels.push(
            rec[n_feat + 1]
                .parse()
                .map_err(|e| Error::parse(lineno, format!("{e}")))?,
        );
        raw.push(rec[n_feat + 2].to_string());
    }
    Dataset::with_row_ids(schema, values, labels, raw, ids)
}

/// Uniform random subset of `n` rows without replacement. Selected rows keep
/// their original relative order.
pub fn sample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if n > ds.n_rows() {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds {} available rows",
            ds.n_rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, ds.n_rows(), n).into_vec();
    picked.sort_unstable();
    Ok(ds.select_rows(&picked))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Train and test come from separate files sharing one dictionary.
    TwoFiles,
    /// One file, partitioned at random.
    RandomSplit { train_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
    /// Cap on records drawn (per file in two-files mode).
    pub sample_size: Option<usize>,
}

/// Random train/test partition. Both sides keep source order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let SplitMode::RandomSplit { train_fraction } = spec.mode else {
        return Err(Error::invalid(
            "two-files mode partitions by file; use load_partitions",
        ));
    };
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} is outside (0, 1)"
        )));
    }
    let pool = match spec.sample_size {
        Some(n) if n < ds.n_rows() => sample(ds, n, spec.seed)?,
        _ => ds.clone(),
    };
    let n = pool.n_rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::invalid("train fraction leaves the train side empty"));
    }
    if n_train >= n {
        return Err(Error::invalid("train fraction leaves the test side empty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // distinct stream from the sampling step above
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((pool.select_rows(train_idx), pool.select_rows(test_idx)))
}

/// Loads train and test according to `spec`. With a test path the files are
/// parsed in order with one shared dictionary; without one the train file is
/// randomly partitioned.
pub fn load_partitions(
    train: &Path,
    test: Option<&Path>,
    spec: &SplitSpec,
    labels: &LabelMap,
) -> Result<(Dataset, Dataset)> {
    match (spec.mode, test) {
        (SplitMode::TwoFiles, Some(test)) => {
            let (train_ds, dict) = load_any(train, None, labels)?;
            let (test_ds, _) = load_any(test, Some(dict), labels)?;
            if train_ds.schema() != test_ds.schema() {
                return Err(Error::SchemaMismatch(
                    "train and test files differ in layout".into(),
                ));
            }
            let cap = |ds: Dataset| match spec.sample_size {
                Some(n) if n < ds.n_rows() => sample(&ds, n, spec.seed),
                _ => Ok(ds),
            };
            Ok((cap(train_ds)?, cap(test_ds)?))
        }
        (SplitMode::TwoFiles, None) => Err(Error::invalid("two-files mode needs a test file")),
        (SplitMode::RandomSplit { .. }, Some(_)) => {
            Err(Error::invalid("random-split mode takes a single file"))
        }
        (SplitMode::RandomSplit { .. }, None) => {
            let (ds, _) = load_any(train, None, labels)?;
            split(&ds, spec)
        }
    }
}

/// Reads either the canonical encoded form or raw 41-feature records,
/// depending on the first line.
pub fn load_any(
    path: &Path,
    dictionary: Option<CategoryDictionary>,
    labels: &LabelMap,
) -> Result<(Dataset, CategoryDictionary)> {
    let file_err = |source| Error::File {
        path: path.to_path_buf(),
        source,
    };
    let mut first = String::new();
    BufReader::new(File::open(path).map_err(file_err)?)
        .read_line(&mut first)
        .map_err(file_err)?;
    let file = File::open(path).map_err(file_err)?;
    if is_canonical_header(&first) {
        let ds = read_canonical(file)?;
        let dict = dictionary.unwrap_or_default();
        Ok((ds.with_dictionary(dict.clone()), dict))
    } else {
        parse_kdd_reader(file, &FeatureSchema::kdd99(), dictionary, labels)
    }
}

/// Column-wise `(min, max)`.
pub fn min_max_stats(ds: &Dataset) -> Result<Vec<(f64, f64)>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut stats: Vec<(f64, f64)> = ds.row(0).iter().map(|&v| (v, v)).collect();
    for row in ds.rows().skip(1) {
        for (s, &v) in stats.iter_mut().zip(row) {
            s.0 = s.0.min(v);
            s.1 = s.1.max(v);
        }
    }
    Ok(stats)
}

/// Rescales every column to `[0, 1]` using previously computed statistics
/// (normally the train set's). Constant columns map to 0; values outside the
/// training range fall outside `[0, 1]`.
pub fn normalize(ds: &Dataset, stats: &[(f64, f64)]) -> Result<Dataset> {
    if stats.len() != ds.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "{} statistics for {} features",
            stats.len(),
            ds.n_features()
        )));
    }
    let w = ds.n_features();
    let mut out = ds.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let (lo, hi) = stats[i % w];
        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
    }
    Ok(out)
}
