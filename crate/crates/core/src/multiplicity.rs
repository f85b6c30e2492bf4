//! Per-instance predictive multiplicity over a Rashomon-restricted score
//! matrix: ambiguity, obscurity relative to the best model, confidence, and
//! set-level discrepancy.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{mean, sem};
use crate::zoo::ScoreMatrix;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("threshold {0} must lie strictly inside (0, 1)")]
    InvalidThreshold(f64),
    #[error("max-F1 thresholds need calibration scores and labels")]
    MissingCalibration,
    #[error("calibration data does not match: {0}")]
    CalibrationMismatch(String),
    #[error("label matrix has no models")]
    NoModels,
    #[error("{0} class groups for {1} instances")]
    GroupCount(usize, usize),
    #[error("best row {0} out of range")]
    BestRow(usize),
    #[error("nothing to summarize")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// How probabilities become hard labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Same cut-off for every model.
    Fixed(f64),
    /// Per-model cut-off maximizing positive-class F1 on the calibration split.
    MaxF1,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed(0.5)
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed(t) => write!(f, "fixed:{t}"),
            ThresholdPolicy::MaxF1 => f.write_str("maxf1"),
        }
    }
}

impl std::str::FromStr for ThresholdPolicy {
    type Err = String;

    /// `fixed:0.5`, `fixed` (0.5) or `maxf1`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "maxf1" | "max-f1" => Ok(ThresholdPolicy::MaxF1),
            "fixed" => Ok(ThresholdPolicy::Fixed(0.5)),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("unknown threshold policy `{s}`"))?;
                let t: f64 = v.parse().map_err(|e| format!("bad threshold `{v}`: {e}"))?;
                if t > 0.0 && t < 1.0 {
                    Ok(ThresholdPolicy::Fixed(t))
                } else {
                    Err(format!("threshold {t} must lie strictly inside (0, 1)"))
                }
            }
        }
    }
}

/// Hard labels, `labels[m][i] = 1` iff `score[m][i] >= thresholds[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub labels: Vec<Vec<u8>>,
    pub thresholds: Vec<f64>,
    pub policy: ThresholdPolicy,
}

impl LabelMatrix {
    pub fn n_models(&self) -> usize {
        self.labels.len()
    }

    pub fn n_instances(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    /// Build from explicit labels; thresholds are recorded as NaN.
    pub fn from_labels(labels: Vec<Vec<u8>>) -> Self {
        let thresholds = vec![f64::NAN; labels.len()];
        Self { labels, thresholds, policy: ThresholdPolicy::Fixed(0.5) }
    }
}

/// Threshold maximizing F1 over candidate cut-offs at each distinct score;
/// ties keep the lowest threshold.
pub fn max_f1_threshold(scores: &[f64], labels: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, 0.5);
    let mut k = 0;
    // sweep thresholds from high to low so `>=` keeps ties below each cut-off
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + (positives - tp)) as f64 };
        if f1 >= best.0 {
            best = (f1, t);
        }
    }
    best.1
}

/// Turn scores into hard labels. `calibration` holds calibration-split
/// scores (same model order) and labels, required by [`ThresholdPolicy::MaxF1`].
pub fn harden(
    scores: &ScoreMatrix,
    policy: ThresholdPolicy,
    calibration: Option<(&ScoreMatrix, &[u8])>,
) -> Result<LabelMatrix> {
    let thresholds = match policy {
        ThresholdPolicy::Fixed(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(MetricsError::InvalidThreshold(t));
            }
            vec![t; scores.n_models()]
        }
        ThresholdPolicy::MaxF1 => {
            let (cal, y) = calibration.ok_or(MetricsError::MissingCalibration)?;
            if cal.model_ids != scores.model_ids {
                return Err(MetricsError::CalibrationMismatch("model ids differ".into()));
            }
            if y.len() != cal.n_instances() {
                return Err(MetricsError::CalibrationMismatch(format!(
                    "{} labels for {} instances",
                    y.len(),
                    cal.n_instances()
                )));
            }
            cal.scores.iter().map(|row| max_f1_threshold(row, y)).collect()
        }
    };
    apply_thresholds(scores, thresholds, policy)
}

/// Label each model's scores with its own cut-off from `thresholds`.
pub fn apply_thresholds(scores: &ScoreMatrix, thresholds: Vec<f64>, policy: ThresholdPolicy) -> Result<LabelMatrix> {
    if thresholds.len() != scores.n_models() {
        return Err(MetricsError::CalibrationMismatch(format!(
            "{} thresholds for {} models",
            thresholds.len(),
            scores.n_models()
        )));
    }
    let labels = scores
        .scores
        .iter()
        .zip(&thresholds)
        .map(|(row, &t)| row.iter().map(|&s| u8::from(s >= t)).collect())
        .collect();
    Ok(LabelMatrix { labels, thresholds, policy })
}

/// 1 iff two models assign different labels to `instance`.
pub fn ambiguity(lm: &LabelMatrix, instance: usize) -> u8 {
    let mut column = lm.labels.iter().map(|r| r[instance]);
    let Some(first) = column.next() else { return 0 };
    u8::from(column.any(|v| v != first))
}

/// Largest fraction of instances on which some pair of models disagrees.
pub fn discrepancy(lm: &LabelMatrix) -> f64 {
    let n = lm.n_instances();
    if lm.n_models() < 2 || n == 0 {
        return 0.0;
    }
    let mut worst = 0usize;
    for a in 0..lm.n_models() {
        for b in a + 1..lm.n_models() {
            let d = lm.labels[a].iter().zip(&lm.labels[b]).filter(|(x, y)| x != y).count();
            worst = worst.max(d);
        }
    }
    worst as f64 / n as f64
}

/// Share of non-best members whose label on `instance` differs from the
/// best model's; zero for a single-member set.
pub fn obscurity(lm: &LabelMatrix, best_row: usize, instance: usize) -> f64 {
    let m = lm.n_models();
    if m < 2 {
        return 0.0;
    }
    let reference = lm.labels[best_row][instance];
    let disagree = lm
        .labels
        .iter()
        .enumerate()
        .filter(|&(k, r)| k != best_row && r[instance] != reference)
        .count();
    disagree as f64 / (m - 1) as f64
}

/// Mean over members of `max(p, 1 - p)`.
pub fn confidence(scores: &ScoreMatrix, instance: usize) -> f64 {
    let total: f64 = scores.column(instance).map(|p| p.max(1.0 - p)).sum();
    total / scores.n_models() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassGroup {
    Majority,
    Minority,
}

impl ClassGroup {
    pub fn of(label: u8, minority_label: u8) -> Self {
        if label == minority_label {
            ClassGroup::Minority
        } else {
            ClassGroup::Majority
        }
    }
}

impl fmt::Display for ClassGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassGroup::Majority => "majority",
            ClassGroup::Minority => "minority",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub instance_id: String,
    pub class_group: ClassGroup,
    pub confidence: f64,
    pub obscurity: f64,
    pub ambiguity: u8,
}

/// Metrics for every instance of a restricted score matrix.
pub fn instance_metrics(
    scores: &ScoreMatrix,
    labels: &LabelMatrix,
    best_row: usize,
    groups: &[ClassGroup],
) -> Result<Vec<InstanceMetrics>> {
    if labels.n_models() == 0 {
        return Err(MetricsError::NoModels);
    }
    if best_row >= labels.n_models() {
        return Err(MetricsError::BestRow(best_row));
    }
    if groups.len() != scores.n_instances() {
        return Err(MetricsError::GroupCount(groups.len(), scores.n_instances()));
    }
    Ok((0..scores.n_instances())
        .map(|i| InstanceMetrics {
            instance_id: scores.instance_ids[i].clone(),
            class_group: groups[i],
            confidence: confidence(scores, i),
            obscurity: obscurity(labels, best_row, i),
            ambiguity: ambiguity(labels, i),
        })
        .collect())
}

/// Means and standard errors of one class group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub class_group: ClassGroup,
    pub n: usize,
    pub mean_obscurity: f64,
    pub sem_obscurity: f64,
    pub mean_confidence: f64,
    pub sem_confidence: f64,
    pub ambiguity_rate: f64,
    pub sem_ambiguity: f64,
}

/// One record per class group present, majority first.
pub fn summarize(metrics: &[InstanceMetrics]) -> Result<Vec<GroupSummary>> {
    if metrics.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut out = Vec::new();
    for group in [ClassGroup::Majority, ClassGroup::Minority] {
        let rows: Vec<&InstanceMetrics> = metrics.iter().filter(|m| m.class_group == group).collect();
        if rows.is_empty() {
            continue;
        }
        let obs: Vec<f64> = rows.iter().map(|m| m.obscurity).collect();
        let conf: Vec<f64> = rows.iter().map(|m| m.confidence).collect();
        let amb: Vec<f64> = rows.iter().map(|m| f64::from(m.ambiguity)).collect();
        out.push(GroupSummary {
            class_group: group,
            n: rows.len(),
            mean_obscurity: mean(&obs),
            sem_obscurity: sem(&obs).unwrap_or(0.0),
            mean_confidence: mean(&conf),
            sem_confidence: sem(&conf).unwrap_or(0.0),
            ambiguity_rate: mean(&amb),
            sem_ambiguity: sem(&amb).unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub const INSTANCE_TABLE_HEADER: [&str; 6] =
    ["instance_id", "class_group", "confidence", "obscurity", "ambiguity", "variant"];

/// Write `instance_id,class_group,confidence,obscurity,ambiguity,variant` rows.
pub fn write_instance_table<'a, W, I>(writer: W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [InstanceMetrics])>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INSTANCE_TABLE_HEADER)?;
    for (variant, metrics) in rows {
        for m in metrics {
            w.write_record([
                m.instance_id.as_str(),
                &m.class_group.to_string(),
                &m.confidence.to_string(),
                &m.obscurity.to_string(),
                &m.ambiguity.to_string(),
                variant,
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
