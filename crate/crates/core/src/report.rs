//! Report records and their on-disk forms.
//!
//! `emit` writes four files into an output directory, each replaced
//! atomically (written to a temporary name, then renamed):
//!
//! | file                | contents                                                  |
//! |---------------------|-----------------------------------------------------------|
//! | `report.json`       | the full [`MultiplicityReport`]                           |
//! | `instances.csv`     | per-instance metrics, one row per instance and variant    |
//! | `group_summary.csv` | per-variant, per-class-group means with standard errors   |
//! | `comparisons.csv`   | calibrated-vs-raw Dunn comparisons                        |
//!
//! `aggregate` reads several `report.json` files and writes
//! `grand_summary.csv` and `strip_points.csv`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::{Calibrator, Variant};
use crate::multiplicity::{write_instance_table, ClassGroup, GroupSummary, InstanceMetrics};
use crate::pipeline::{ExperimentConfig, PipelineError};
use crate::rashomon::RashomonSet;
use crate::stats::{mean, sem, TestResult};
use crate::zoo::{ModelParams, TrainingSummary};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const INSTANCES_FILE: &str = "instances.csv";
pub const GROUP_SUMMARY_FILE: &str = "group_summary.csv";
pub const COMPARISONS_FILE: &str = "comparisons.csv";
pub const GRAND_SUMMARY_FILE: &str = "grand_summary.csv";
pub const STRIP_POINTS_FILE: &str = "strip_points.csv";

pub const GROUP_SUMMARY_HEADER: [&str; 9] = [
    "variant",
    "class_group",
    "n",
    "mean_obscurity",
    "sem_obscurity",
    "mean_confidence",
    "sem_confidence",
    "ambiguity_rate",
    "sem_ambiguity",
];
pub const COMPARISONS_HEADER: [&str; 6] = ["class_group", "comparison", "metric", "z", "p_unadj", "p_adj"];
pub const GRAND_SUMMARY_HEADER: [&str; 7] = [
    "variant",
    "class_group",
    "n_datasets",
    "grand_mean_obscurity",
    "sem_obscurity",
    "grand_mean_confidence",
    "sem_confidence",
];
pub const STRIP_POINTS_HEADER: [&str; 5] = ["dataset", "variant", "class_group", "mean_obscurity", "mean_confidence"];

/// Uncalibrated scores or one of the calibration methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalVariant {
    Raw,
    Platt,
    Isotonic,
    Temperature,
}

impl From<Variant> for EvalVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Platt => EvalVariant::Platt,
            Variant::Isotonic => EvalVariant::Isotonic,
            Variant::Temperature => EvalVariant::Temperature,
        }
    }
}

impl fmt::Display for EvalVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalVariant::Raw => "raw",
            EvalVariant::Platt => "platt",
            EvalVariant::Isotonic => "isotonic",
            EvalVariant::Temperature => "temperature",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Obscurity,
    Confidence,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Obscurity => "obscurity",
            Metric::Confidence => "confidence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch when the report was assembled.
    pub timestamp: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_rows: usize,
    pub n_features: Option<usize>,
    pub dropped_rows: usize,
    pub imbalance_ratio: f64,
    pub minority_label: u8,
    pub positive_label_source: String,
    /// Train, calibration and test sizes when the split was made here.
    pub split_sizes: Option<[usize; 3]>,
    pub n_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub params: Option<ModelParams>,
    pub training: Option<TrainingSummary>,
    pub train_auc: Option<f64>,
    pub calibration_auc: Option<f64>,
    pub test_auc: Option<f64>,
    pub rashomon_member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorRecord {
    pub model_id: String,
    pub calibrator: Calibrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: EvalVariant,
    /// Empty for the raw variant.
    pub calibrators: Vec<CalibratorRecord>,
    /// Hard-label threshold per Rashomon member.
    pub thresholds: Vec<f64>,
    pub discrepancy: f64,
    pub groups: Vec<GroupSummary>,
    pub instances: Vec<InstanceMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub class_group: ClassGroup,
    pub metric: Metric,
    pub result: TestResult,
}

/// One calibrated-vs-raw comparison row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub class_group: ClassGroup,
    pub variant: EvalVariant,
    pub metric: Metric,
    /// Positive when the calibrated variant ranks higher than raw.
    pub z: f64,
    pub p_unadj: f64,
    pub p_adj: f64,
}

impl ComparisonRow {
    pub fn comparison(&self) -> String {
        format!("{} vs. raw", self.variant)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestBattery {
    /// Minority against majority, raw obscurity, two-sided.
    pub obscurity_by_group: Option<TestResult>,
    /// Minority against majority, raw confidence, two-sided.
    pub confidence_by_group: Option<TestResult>,
    /// Class group by raw ambiguity, 2x2.
    pub ambiguity_by_group: Option<TestResult>,
    /// Omnibus test across all variants, per class group and metric.
    pub kruskal_wallis: Vec<GroupTest>,
    pub bonferroni_m: usize,
    pub comparisons: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub dataset: DatasetSummary,
    pub zoo: Vec<ModelRecord>,
    pub rashomon: RashomonSet,
    pub variants: Vec<VariantReport>,
    pub tests: TestBattery,
    pub warnings: Vec<String>,
}

impl MultiplicityReport {
    pub fn variant(&self, v: EvalVariant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Report(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Report(e.to_string()))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), source }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))?;
    Ok(target)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let report = |e: csv::Error| PipelineError::Report(e.to_string());
    w.write_record(header).map_err(report)?;
    for row in rows {
        w.write_record(&row).map_err(report)?;
    }
    w.into_inner().map_err(|e| PipelineError::Report(e.to_string()))
}

/// Write the report files into `out_dir`, creating it if needed.
pub fn emit(report: &MultiplicityReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, PipelineError> {
    if report.variants.is_empty() {
        return Err(PipelineError::Report("report has no variants".into()));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut written = vec![write_atomic(dir, REPORT_FILE, report.to_json()?.as_bytes())?];

    let mut buf = Vec::new();
    let names: Vec<String> = report.variants.iter().map(|v| v.variant.to_string()).collect();
    write_instance_table(
        &mut buf,
        report.variants.iter().zip(&names).map(|(v, n)| (n.as_str(), v.instances.as_slice())),
    )?;
    written.push(write_atomic(dir, INSTANCES_FILE, &buf)?);

    let groups = report.variants.iter().flat_map(|v| {
        v.groups.iter().map(move |g| {
            vec![
                v.variant.to_string(),
                g.class_group.to_string(),
                g.n.to_string(),
                g.mean_obscurity.to_string(),
                g.sem_obscurity.to_string(),
                g.mean_confidence.to_string(),
                g.sem_confidence.to_string(),
                g.ambiguity_rate.to_string(),
                g.sem_ambiguity.to_string(),
            ]
        })
    });
    written.push(write_atomic(dir, GROUP_SUMMARY_FILE, &csv_bytes(&GROUP_SUMMARY_HEADER, groups)?)?);

    let comparisons = report.tests.comparisons.iter().map(|c| {
        vec![
            c.class_group.to_string(),
            c.comparison(),
            c.metric.to_string(),
            c.z.to_string(),
            c.p_unadj.to_string(),
            c.p_adj.to_string(),
        ]
    });
    written.push(write_atomic(dir, COMPARISONS_FILE, &csv_bytes(&COMPARISONS_HEADER, comparisons)?)?);
    Ok(written)
}

/// Per-dataset group means, one point of a strip chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripPoint {
    pub dataset: String,
    pub variant: EvalVariant,
    pub class_group: ClassGroup,
    pub mean_obscurity: f64,
    pub mean_confidence: f64,
}

/// Mean of per-dataset group means, with the standard error across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandMean {
    pub variant: EvalVariant,
    pub class_group: ClassGroup,
    pub n_datasets: usize,
    pub grand_mean_obscurity: f64,
    pub sem_obscurity: f64,
    pub grand_mean_confidence: f64,
    pub sem_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandSummary {
    pub rows: Vec<GrandMean>,
    pub points: Vec<StripPoint>,
}

/// Combine several reports into grand means over datasets.
pub fn aggregate(reports: &[MultiplicityReport]) -> Result<GrandSummary, PipelineError> {
    if reports.is_empty() {
        return Err(PipelineError::Config("no reports to aggregate".into()));
    }
    let points: Vec<StripPoint> = reports
        .iter()
        .flat_map(|r| {
            r.variants.iter().flat_map(move |v| {
                v.groups.iter().map(move |g| StripPoint {
                    dataset: r.dataset.name.clone(),
                    variant: v.variant,
                    class_group: g.class_group,
                    mean_obscurity: g.mean_obscurity,
                    mean_confidence: g.mean_confidence,
                })
            })
        })
        .collect();

    let mut keys: Vec<(EvalVariant, ClassGroup)> = points.iter().map(|p| (p.variant, p.class_group)).collect();
    keys.sort();
    keys.dedup();
    let rows = keys
        .into_iter()
        .map(|(variant, class_group)| {
            let sel: Vec<&StripPoint> =
                points.iter().filter(|p| p.variant == variant && p.class_group == class_group).collect();
            let obs: Vec<f64> = sel.iter().map(|p| p.mean_obscurity).collect();
            let conf: Vec<f64> = sel.iter().map(|p| p.mean_confidence).collect();
            GrandMean {
                variant,
                class_group,
                n_datasets: sel.len(),
                grand_mean_obscurity: mean(&obs),
                sem_obscurity: sem(&obs).unwrap_or(0.0),
                grand_mean_confidence: mean(&conf),
                sem_confidence: sem(&conf).unwrap_or(0.0),
            }
        })
        .collect();
    Ok(GrandSummary { rows, points })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MultiplicityReport, PipelineError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    MultiplicityReport::from_json(&text)
}

pub fn emit_aggregate(summary: &GrandSummary, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let rows = summary.rows.iter().map(|g| {
        vec![
            g.variant.to_string(),
            g.class_group.to_string(),
            g.n_datasets.to_string(),
            g.grand_mean_obscurity.to_string(),
            g.sem_obscurity.to_string(),
            g.grand_mean_confidence.to_string(),
            g.sem_confidence.to_string(),
        ]
    });
    let points = summary.points.iter().map(|p| {
        vec![
            p.dataset.clone(),
            p.variant.to_string(),
            p.class_group.to_string(),
            p.mean_obscurity.to_string(),
            p.mean_confidence.to_string(),
        ]
    });
    Ok(vec![
        write_atomic(dir, GRAND_SUMMARY_FILE, &csv_bytes(&GRAND_SUMMARY_HEADER, rows)?)?,
        write_atomic(dir, STRIP_POINTS_FILE, &csv_bytes(&STRIP_POINTS_HEADER, points)?)?,
    ])
}
