//! Tabular binary-classification datasets: loading, synthesis, class
//! imbalance and stratified train/calibration/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cell values treated as missing when loading a table.
const MISSING_MARKERS: [&str; 4] = ["", "NA", "?", "NaN"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown target column `{0}`")]
    UnknownColumn(String),
    #[error("target column must have exactly two distinct values, found {0}")]
    TargetNotBinary(usize),
    #[error("positive value `{0}` does not occur in the target column")]
    UnknownPositiveValue(String),
    #[error("every row was dropped because of missing values")]
    AllRowsDropped,
    #[error("labels must contain both classes")]
    SingleClass,
    #[error("inconsistent dataset: {0}")]
    Shape(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("split is infeasible: {0}")]
    InfeasibleSplit(String),
    #[error("invalid synthesis parameters: {0}")]
    InvalidSynthesis(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Feature matrix, binary labels and naming metadata for one tabular task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// Row-major feature matrix, `n_rows x n_features`.
    pub features: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub labels: Vec<u8>,
    /// Original target value that was mapped to label 1.
    pub positive_label_source: String,
    /// Rows removed during loading because a cell was missing.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        positive_label_source: impl Into<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(DataError::Shape(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(row) = features.iter().find(|r| r.len() != feature_names.len()) {
            return Err(DataError::Shape(format!(
                "row with {} values but {} feature names",
                row.len(),
                feature_names.len()
            )));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Shape("non-finite feature value".into()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(DataError::Shape("labels must be 0 or 1".into()));
        }
        if !labels.contains(&0) || !labels.contains(&1) {
            return Err(DataError::SingleClass);
        }
        Ok(Self {
            name: name.into(),
            features,
            feature_names,
            labels,
            positive_label_source: positive_label_source.into(),
            dropped_rows: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn view<'a>(&'a self, rows: &'a [usize]) -> DatasetView<'a> {
        DatasetView { data: self, rows }
    }

    /// The less frequent label; label 1 when the classes are equinumerous.
    pub fn minority_label(&self) -> u8 {
        minority_label(&self.labels)
    }
}

/// Borrowed subset of a dataset's rows, in the given order.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    pub data: &'a Dataset,
    pub rows: &'a [usize],
}

impl<'a> DatasetView<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.data.n_features()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data.features[self.rows[i]]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.data.labels[self.rows[i]]
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|&r| self.data.labels[r]).collect()
    }

    pub fn instance_ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.to_string()).collect()
    }
}

/// Options for [`load_table_with`].
#[derive(Debug, Clone)]
pub struct TableOptions {
    pub delimiter: u8,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Load a comma-delimited table with a header row.
pub fn load_table(path: impl AsRef<Path>, target_column: &str, positive_value: &str) -> Result<Dataset> {
    load_table_with(path, target_column, positive_value, &TableOptions::default())
}

/// Load a delimited table. Numeric columns pass through, any column with a
/// non-numeric cell is one-hot encoded over all of its levels, and rows with
/// a missing cell are dropped.
pub fn load_table_with(
    path: impl AsRef<Path>,
    target_column: &str,
    positive_value: &str,
    options: &TableOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::UnknownColumn(target_column.to_owned()))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let cells: Vec<String> = record.iter().map(str::to_owned).collect();
        if cells.iter().any(|c| MISSING_MARKERS.contains(&c.as_str())) {
            dropped += 1;
            continue;
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(DataError::AllRowsDropped);
    }

    let target_levels: BTreeSet<&str> = rows.iter().map(|r| r[target_idx].as_str()).collect();
    if target_levels.len() != 2 {
        return Err(DataError::TargetNotBinary(target_levels.len()));
    }
    if !target_levels.contains(positive_value) {
        return Err(DataError::UnknownPositiveValue(positive_value.to_owned()));
    }
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r[target_idx] == positive_value))
        .collect();

    let mut encoders = Vec::new();
    let mut feature_names = Vec::new();
    for (col, name) in header.iter().enumerate() {
        if col == target_idx {
            continue;
        }
        let numeric = rows.iter().all(|r| r[col].parse::<f64>().is_ok_and(f64::is_finite));
        if numeric {
            feature_names.push(name.clone());
            encoders.push(ColumnEncoder::Numeric(col));
        } else {
            let levels: Vec<String> = rows
                .iter()
                .map(|r| r[col].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            feature_names.extend(levels.iter().map(|l| format!("{name}={l}")));
            encoders.push(ColumnEncoder::OneHot(col, levels));
        }
    }

    let features = rows
        .iter()
        .map(|r| {
            let mut out = Vec::with_capacity(feature_names.len());
            for enc in &encoders {
                match enc {
                    ColumnEncoder::Numeric(c) => out.push(r[*c].parse::<f64>().unwrap_or(0.0)),
                    ColumnEncoder::OneHot(c, levels) => {
                        out.extend(levels.iter().map(|l| if *l == r[*c] { 1.0 } else { 0.0 }))
                    }
                }
            }
            out
        })
        .collect();

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    let mut dataset = Dataset::new(name, features, feature_names, labels, positive_value)?;
    dataset.dropped_rows = dropped;
    Ok(dataset)
}

enum ColumnEncoder {
    Numeric(usize),
    OneHot(usize, Vec<String>),
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    (labels.len() - ones, ones)
}

/// The less frequent label in `labels`; 1 on a tie.
pub fn minority_label(labels: &[u8]) -> u8 {
    let (zeros, ones) = class_counts(labels);
    u8::from(ones <= zeros)
}

/// Majority count over minority count.
pub fn imbalance_ratio(d: &Dataset) -> Result<f64> {
    imbalance_ratio_of(&d.labels)
}

pub fn imbalance_ratio_of(labels: &[u8]) -> Result<f64> {
    let (zeros, ones) = class_counts(labels);
    if zeros == 0 || ones == 0 {
        return Err(DataError::SingleClass);
    }
    Ok(zeros.max(ones) as f64 / zeros.min(ones) as f64)
}

/// Which of the three disjoint partitions a score matrix was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Calibration,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Calibration => "calibration",
            SplitTag::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "calibration" | "cal" => Ok(SplitTag::Calibration),
            "test" => Ok(SplitTag::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Disjoint train/calibration/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitAssignment {
    pub fn rows(&self, tag: SplitTag) -> &[usize] {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::Calibration => &self.calibration,
            SplitTag::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.calibration.len(), self.test.len()]
    }
}

pub fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(DataError::InvalidFractions(format!("{fractions:?} must all be positive")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidFractions(format!("{fractions:?} sum to {sum}, not 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `total` items by `weights`, ties going
/// to the earlier slot.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &k in order.iter().take(total - assigned) {
        counts[k] += 1;
    }
    counts
}

/// Stratified three-way split. Split sizes are apportioned from the overall
/// row count, then the positive-class count of each split is apportioned so
/// it sits within one instance of the global proportion. Rows of each class
/// are shuffled with a seeded generator before being dealt out.
pub fn stratified_split(d: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    validate_fractions(fractions)?;
    let n = d.n_rows();
    let (_, n_pos) = class_counts(&d.labels);
    let n_neg = n - n_pos;
    if n_pos < 3 || n_neg < 3 {
        return Err(DataError::InfeasibleSplit(format!(
            "need at least 3 rows per class, have {n_neg} negative and {n_pos} positive"
        )));
    }

    let sizes = apportion(n, &fractions);
    if sizes.iter().any(|&s| s < 2) {
        return Err(DataError::InfeasibleSplit(format!("split sizes {sizes:?} leave a split with fewer than 2 rows")));
    }
    let targets: Vec<f64> = sizes.iter().map(|&s| s as f64 * n_pos as f64 / n as f64).collect();
    let mut pos = apportion(n_pos, &sizes.iter().map(|&s| s as f64).collect::<Vec<_>>());

    // Repair splits left without one of the classes by moving a positive
    // from (or to) a split whose count was rounded the other way.
    for k in 0..3 {
        if pos[k] == 0 {
            let donor = (0..3)
                .filter(|&j| j != k && pos[j] as f64 > targets[j] && pos[j] >= 2)
                .max_by(|&a, &b| (pos[a] as f64 - targets[a]).total_cmp(&(pos[b] as f64 - targets[b])));
            match donor {
                Some(j) => {
                    pos[j] -= 1;
                    pos[k] += 1;
                }
                None => return Err(DataError::InfeasibleSplit("cannot place a positive row in every split".into())),
            }
        }
        if pos[k] == sizes[k] {
            let taker = (0..3)
                .filter(|&j| j != k && (pos[j] as f64) < targets[j] && pos[j] + 1 < sizes[j])
                .max_by(|&a, &b| (targets[a] - pos[a] as f64).total_cmp(&(targets[b] - pos[b] as f64)));
            match taker {
                Some(j) => {
                    pos[j] += 1;
                    pos[k] -= 1;
                }
                None => return Err(DataError::InfeasibleSplit("cannot place a negative row in every split".into())),
            }
        }
    }
    if (0..3).any(|k| pos[k] == 0 || pos[k] == sizes[k]) {
        return Err(DataError::InfeasibleSplit("cannot place both classes in every split".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| d.labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut start = 0;
        for k in 0..3 {
            let take = if class == 1 { pos[k] } else { sizes[k] - pos[k] };
            parts[k].extend_from_slice(&idx[start..start + take]);
            start += take;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, calibration, test] = parts;
    Ok(SplitAssignment { train, calibration, test, fractions, seed })
}

/// Parameters of the two-component Gaussian mixture used as a test fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub imbalance: f64,
    pub overlap: f64,
    pub seed: u64,
    pub dims: usize,
}

impl SynthSpec {
    pub fn new(n: usize, imbalance: f64, overlap: f64, seed: u64) -> Self {
        Self { n, imbalance, overlap, seed, dims: 5 }
    }
}

/// Two-component Gaussian mixture in five dimensions; see [`synthesize_spec`].
pub fn synthesize(n: usize, imbalance: f64, overlap: f64, seed: u64) -> Result<Dataset> {
    synthesize_spec(&SynthSpec::new(n, imbalance, overlap, seed))
}

/// The minority class (label 1) gets `round(n / (1 + imbalance))` rows. The
/// distance between component means is `4 (1 - overlap)`, spread evenly
/// over all dimensions; the minority component is slightly wider.
pub fn synthesize_spec(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec { n, imbalance, overlap, seed, dims } = *spec;
    if n < 20 {
        return Err(DataError::InvalidSynthesis(format!("n = {n} must be at least 20")));
    }
    if !(imbalance.is_finite() && imbalance >= 1.0) {
        return Err(DataError::InvalidSynthesis(format!("imbalance = {imbalance} must be >= 1")));
    }
    if !(overlap > 0.0 && overlap < 1.0) {
        return Err(DataError::InvalidSynthesis(format!("overlap = {overlap} must lie in (0, 1)")));
    }
    if !(2..=10).contains(&dims) {
        return Err(DataError::InvalidSynthesis(format!("dims = {dims} must lie in 2..=10")));
    }

    let n_min = ((n as f64 / (1.0 + imbalance)).round() as usize).clamp(1, n / 2);
    let shift = 4.0 * (1.0 - overlap) / (dims as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let majority = Normal::new(0.0, 1.0).expect("valid normal");
    let minority = Normal::new(0.0, 1.25).expect("valid normal");

    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_min)).collect();
    labels.shuffle(&mut rng);
    let features = labels
        .iter()
        .map(|&y| {
            (0..dims)
                .map(|_| {
                    if y == 1 {
                        shift + minority.sample(&mut rng)
                    } else {
                        majority.sample(&mut rng)
                    }
                })
                .collect()
        })
        .collect();
    // one uninformative column so learners have something to ignore
    let mut features: Vec<Vec<f64>> = features;
    for row in features.iter_mut() {
        row.push(rng.random_range(-1.0..1.0));
    }
    let mut names: Vec<String> = (0..dims).map(|j| format!("x{j}")).collect();
    names.push("noise".into());
    Dataset::new(format!("synthetic_n{n}_ir{imbalance}_ov{overlap}_s{seed}"), features, names, labels, "1")
}

/// Per-class counts keyed by label, for reporting.
pub fn label_counts(labels: &[u8]) -> BTreeMap<u8, usize> {
    let mut m = BTreeMap::new();
    for &y in labels {
        *m.entry(y).or_insert(0) += 1;
    }
    m
}
