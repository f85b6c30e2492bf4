//! End-to-end experiment: split, train the zoo, select the Rashomon set,
//! measure multiplicity on the test split before and after each
//! calibration method, and compare the variants statistically.

use std::collections::HashMap;
use std::io::Read;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{calibrate_set, Variant};
use crate::data::{
    imbalance_ratio_of, load_table_with, minority_label, stratified_split, synthesize_spec, validate_fractions,
    DataError, Dataset, SplitTag, SynthSpec, TableOptions,
};
use crate::multiplicity::{
    apply_thresholds, discrepancy, harden, instance_metrics, summarize, ClassGroup, InstanceMetrics, LabelMatrix, MetricsError, ThresholdPolicy,
};
use crate::rashomon::{self, RashomonError, RashomonSet, DEFAULT_EPSILON};
use crate::report::{
    CalibratorRecord, ComparisonRow, DatasetSummary, EvalVariant, GroupTest, Metric, ModelRecord,
    MultiplicityReport, Provenance, TestBattery, VariantReport, SCHEMA_VERSION,
};
use crate::stats::{
    bonferroni, chi_squared_independence, dunn_test, kruskal_wallis, wilcoxon_rank_sum, Alternative, StatsError,
};
use crate::zoo::{self, auc, default_zoo, ModelSpec, ScoreMatrix, ZooError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[config] {0}")]
    Config(String),
    #[error("[data] {0}")]
    Data(#[from] DataError),
    #[error("[training] {0}")]
    Training(#[from] ZooError),
    #[error("[rashomon] {0}")]
    Rashomon(#[from] RashomonError),
    #[error("[metrics] {0}")]
    Metrics(#[from] MetricsError),
    #[error("[statistics] {0}")]
    Stats(#[from] StatsError),
    #[error("[report] {0}")]
    Report(String),
    #[error("[io] {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 1 for configuration errors, 2 for data errors, 3 for failures in a
    /// later stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Table {
        path: PathBuf,
        target: String,
        positive: String,
        delimiter: char,
    },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Train, calibration and test fractions.
    pub fractions: [f64; 3],
    /// Size of the default zoo; ignored when `models` is set.
    pub n_models: usize,
    /// Explicit model specs replacing the default zoo.
    pub models: Option<Vec<ModelSpec>>,
    pub epsilon: f64,
    pub methods: Vec<Variant>,
    pub threshold: ThresholdPolicy,
    pub seed: u64,
    /// Bonferroni family size; defaults to the number of comparison rows
    /// per metric.
    pub bonferroni_m: Option<usize>,
    /// Split whose AUC decides Rashomon membership.
    pub selection_split: SplitTag,
}

impl ExperimentConfig {
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            fractions: [0.6, 0.2, 0.2],
            n_models: 20,
            models: None,
            epsilon: DEFAULT_EPSILON,
            methods: Variant::ALL.to_vec(),
            threshold: ThresholdPolicy::default(),
            seed: 42,
            bonferroni_m: None,
            selection_split: SplitTag::Test,
        }
    }

    pub fn table(path: impl Into<PathBuf>, target: &str, positive: &str) -> Self {
        Self::new(DataSource::Table {
            path: path.into(),
            target: target.to_owned(),
            positive: positive.to_owned(),
            delimiter: ',',
        })
    }

    pub fn synthetic(spec: SynthSpec) -> Self {
        Self::new(DataSource::Synthetic(spec))
    }

    pub fn validate(&self) -> Result<()> {
        validate_fractions(self.fractions).map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(PipelineError::Config(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        match &self.models {
            Some(m) if m.is_empty() => return Err(PipelineError::Config("explicit model list is empty".into())),
            Some(m) => {
                for spec in m {
                    spec.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
                }
            }
            None if self.n_models < 2 => {
                return Err(PipelineError::Config(format!("n_models = {} must be at least 2", self.n_models)))
            }
            None => {}
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(PipelineError::Config("calibration methods listed twice".into()));
        }
        if let ThresholdPolicy::Fixed(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(PipelineError::Config(format!("threshold {t} must lie in (0, 1)")));
            }
        }
        if self.bonferroni_m == Some(0) {
            return Err(PipelineError::Config("Bonferroni family size must be at least 1".into()));
        }
        if self.selection_split == SplitTag::Train {
            return Err(PipelineError::Config("Rashomon selection must use held-out data".into()));
        }
        if let DataSource::Table { delimiter, .. } = &self.source {
            if !delimiter.is_ascii() {
                return Err(PipelineError::Config(format!("delimiter `{delimiter}` must be ASCII")));
            }
        }
        Ok(())
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        self.models.clone().unwrap_or_else(|| default_zoo(self.n_models, self.seed))
    }
}

fn load(source: &DataSource) -> Result<Dataset> {
    Ok(match source {
        DataSource::Table { path, target, positive, delimiter } => {
            load_table_with(path, target, positive, &TableOptions { delimiter: *delimiter as u8 })?
        }
        DataSource::Synthetic(spec) => synthesize_spec(spec)?,
    })
}

fn timestamp() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}

/// Run every stage of the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MultiplicityReport> {
    cfg.validate()?;
    let data = load(&cfg.source)?;
    let ratio = imbalance_ratio_of(&data.labels)?;
    let minority = data.minority_label();
    let split = stratified_split(&data, cfg.fractions, cfg.seed)?;

    let specs = cfg.specs();
    let train_view = data.view(&split.train);
    let models = zoo::train_all(&specs, &train_view)?;

    let view = |tag: SplitTag| data.view(split.rows(tag));
    let train_scores = zoo::score(&models, &train_view, SplitTag::Train)?;
    let cal_scores = zoo::score(&models, &view(SplitTag::Calibration), SplitTag::Calibration)?;
    let test_scores = zoo::score(&models, &view(SplitTag::Test), SplitTag::Test)?;
    let cal_labels = view(SplitTag::Calibration).labels();
    let test_labels = view(SplitTag::Test).labels();

    let (selection, selection_labels) = match cfg.selection_split {
        SplitTag::Calibration => (&cal_scores, &cal_labels),
        _ => (&test_scores, &test_labels),
    };
    let set = rashomon::build(selection, selection_labels, cfg.epsilon)?;

    let split_auc = |m: &ScoreMatrix, y: &[u8], k: usize| auc(&m.scores[k], y).ok();
    let train_labels = train_view.labels();
    let zoo_records = models
        .iter()
        .enumerate()
        .map(|(k, m)| ModelRecord {
            id: m.id().to_owned(),
            params: Some(m.spec.params.clone()),
            training: Some(m.summary.clone()),
            train_auc: split_auc(&train_scores, &train_labels, k),
            calibration_auc: split_auc(&cal_scores, &cal_labels, k),
            test_auc: split_auc(&test_scores, &test_labels, k),
            rashomon_member: set.contains(m.id()),
        })
        .collect();

    let groups: Vec<ClassGroup> = test_labels.iter().map(|&y| ClassGroup::of(y, minority)).collect();
    let outcome = evaluate(
        &EvaluationInput {
            rashomon: &set,
            calibration: Some((&cal_scores, &cal_labels)),
            evaluation: &test_scores,
            eval_groups: &groups,
        },
        &cfg.methods,
        cfg.threshold,
    )?;

    let mut report = MultiplicityReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            timestamp: timestamp(),
            config: cfg.clone(),
        },
        dataset: DatasetSummary {
            name: data.name.clone(),
            n_rows: data.n_rows(),
            n_features: Some(data.n_features()),
            dropped_rows: data.dropped_rows,
            imbalance_ratio: ratio,
            minority_label: minority,
            positive_label_source: data.positive_label_source.clone(),
            split_sizes: Some(split.sizes()),
            n_evaluated: test_scores.n_instances(),
        },
        zoo: zoo_records,
        rashomon: set,
        variants: outcome.variants,
        tests: TestBattery::default(),
        warnings: outcome.warnings,
    };
    finish_tests(&mut report, cfg.bonferroni_m)?;
    Ok(report)
}

/// Scores and labels needed to measure multiplicity on one split.
pub struct EvaluationInput<'a> {
    pub rashomon: &'a RashomonSet,
    /// Calibration-split scores (all candidates) and labels.
    pub calibration: Option<(&'a ScoreMatrix, &'a [u8])>,
    /// Evaluation-split scores (all candidates).
    pub evaluation: &'a ScoreMatrix,
    pub eval_groups: &'a [ClassGroup],
}

pub struct EvaluationOutcome {
    pub variants: Vec<VariantReport>,
    pub warnings: Vec<String>,
}

/// Raw metrics, then one calibrated evaluation per method. Hard labels of
/// every variant use the cut-offs chosen on the raw scores, so under max-F1
/// a calibrated model keeps its tuned operating point. A method whose fit
/// fails for any Rashomon member is skipped with a warning.
pub fn evaluate(input: &EvaluationInput<'_>, methods: &[Variant], threshold: ThresholdPolicy) -> Result<EvaluationOutcome> {
    let eval = rashomon::restrict(input.evaluation, input.rashomon)?;
    let cal = input
        .calibration
        .map(|(m, y)| rashomon::restrict(m, input.rashomon).map(|r| (r.matrix, y)))
        .transpose()?;
    if cal.is_none() && (!methods.is_empty() || threshold == ThresholdPolicy::MaxF1) {
        return Err(PipelineError::Config(
            "calibration scores are required for calibration methods and max-F1 thresholds".into(),
        ));
    }
    let best = eval.best_row;

    let measure = |labels: LabelMatrix, scores: &ScoreMatrix| -> Result<_> {
        let instances = instance_metrics(scores, &labels, best, input.eval_groups)?;
        let groups = summarize(&instances)?;
        Ok((labels, instances, groups))
    };

    let mut variants = Vec::with_capacity(methods.len() + 1);
    let raw_labels = harden(&eval.matrix, threshold, cal.as_ref().map(|(m, y)| (m, *y)))?;
    // cut-offs stay those of the raw scores for every variant
    let cutoffs = raw_labels.thresholds.clone();
    let (labels, instances, groups) = measure(raw_labels, &eval.matrix)?;
    variants.push(VariantReport {
        variant: EvalVariant::Raw,
        calibrators: Vec::new(),
        thresholds: labels.thresholds.clone(),
        discrepancy: discrepancy(&labels),
        groups,
        instances,
    });

    let mut warnings = Vec::new();
    for &method in methods {
        let (cal_matrix, cal_labels) = cal.as_ref().expect("checked above");
        let fitted = match calibrate_set(cal_matrix, &eval.matrix, cal_labels, method) {
            Ok(f) => f,
            Err(e) => {
                warnings.push(format!("{method} skipped: {e}"));
                continue;
            }
        };
        let hard = apply_thresholds(&fitted.evaluation, cutoffs.clone(), threshold)?;
        let (labels, instances, groups) = measure(hard, &fitted.evaluation)?;
        variants.push(VariantReport {
            variant: method.into(),
            calibrators: fitted
                .calibrators
                .into_iter()
                .map(|(model_id, calibrator)| CalibratorRecord { model_id, calibrator })
                .collect(),
            thresholds: labels.thresholds.clone(),
            discrepancy: discrepancy(&labels),
            groups,
            instances,
        });
    }
    Ok(EvaluationOutcome { variants, warnings })
}

fn values(instances: &[InstanceMetrics], group: ClassGroup, metric: Metric) -> Vec<f64> {
    instances
        .iter()
        .filter(|m| m.class_group == group)
        .map(|m| match metric {
            Metric::Obscurity => m.obscurity,
            Metric::Confidence => m.confidence,
        })
        .collect()
}

fn default_family_size(report: &MultiplicityReport) -> usize {
    let calibrated = report.variants.iter().filter(|v| v.variant != EvalVariant::Raw).count();
    let groups = report
        .variant(EvalVariant::Raw)
        .map_or(0, |r| r.groups.iter().filter(|g| g.n > 0).count());
    (calibrated * groups).max(1)
}

/// Dunn comparisons of every calibrated variant against raw, per class
/// group and metric. Ranks are pooled over all variants within a group.
/// `z` is positive when the calibrated values rank above raw.
pub fn compare_variants(report: &MultiplicityReport, bonferroni_m: Option<usize>) -> Result<Vec<ComparisonRow>> {
    let raw = report
        .variant(EvalVariant::Raw)
        .ok_or_else(|| PipelineError::Report("report has no raw variant".into()))?;
    let ordered: Vec<&VariantReport> = std::iter::once(raw)
        .chain(report.variants.iter().filter(|v| v.variant != EvalVariant::Raw))
        .collect();
    if ordered.len() < 2 {
        return Err(PipelineError::Report("no calibrated variant to compare against raw".into()));
    }
    let m = bonferroni_m.unwrap_or_else(|| default_family_size(report));

    let mut rows = Vec::new();
    for group in [ClassGroup::Majority, ClassGroup::Minority] {
        for metric in [Metric::Obscurity, Metric::Confidence] {
            let samples: Vec<Vec<f64>> = ordered.iter().map(|v| values(&v.instances, group, metric)).collect();
            if samples[0].is_empty() {
                continue;
            }
            let pairs: Vec<(usize, usize)> = (1..ordered.len()).map(|k| (k, 0)).collect();
            let results = dunn_test(&samples, &pairs)?;
            let p_unadj: Vec<f64> = results.iter().map(|r| r.p_unadjusted).collect();
            let p_adj = bonferroni(&p_unadj, m.max(p_unadj.len()))?;
            for (k, (r, pa)) in results.iter().zip(p_adj).enumerate() {
                rows.push(ComparisonRow {
                    class_group: group,
                    variant: ordered[k + 1].variant,
                    metric,
                    z: r.statistic,
                    p_unadj: r.p_unadjusted,
                    p_adj: pa,
                });
            }
        }
    }
    // group, then variant, then metric
    rows.sort_by_key(|r| (r.class_group, r.variant, r.metric == Metric::Confidence));
    Ok(rows)
}

/// Fill the test battery: group tests on raw metrics, Kruskal-Wallis over
/// variants and the calibrated-vs-raw comparisons.
fn finish_tests(report: &mut MultiplicityReport, bonferroni_m: Option<usize>) -> Result<()> {
    let raw = report
        .variant(EvalVariant::Raw)
        .ok_or_else(|| PipelineError::Report("report has no raw variant".into()))?;
    let mut tests = TestBattery { bonferroni_m: bonferroni_m.unwrap_or_else(|| default_family_size(report)), ..Default::default() };
    let mut warnings = Vec::new();

    let by_group = |metric| {
        wilcoxon_rank_sum(
            &values(&raw.instances, ClassGroup::Minority, metric),
            &values(&raw.instances, ClassGroup::Majority, metric),
            Alternative::TwoSided,
        )
    };
    match (by_group(Metric::Obscurity), by_group(Metric::Confidence)) {
        (Ok(o), Ok(c)) => {
            tests.obscurity_by_group = Some(o);
            tests.confidence_by_group = Some(c);
        }
        (Err(e), _) | (_, Err(e)) => warnings.push(format!("group rank-sum tests skipped: {e}")),
    }

    let mut table = [[0u64; 2]; 2];
    for m in &raw.instances {
        let row = usize::from(m.class_group == ClassGroup::Minority);
        table[row][usize::from(m.ambiguity)] += 1;
    }
    match chi_squared_independence(table) {
        Ok(r) => tests.ambiguity_by_group = Some(r),
        Err(e) => warnings.push(format!("ambiguity chi-squared test skipped: {e}")),
    }

    if report.variants.len() >= 2 {
        for group in [ClassGroup::Majority, ClassGroup::Minority] {
            for metric in [Metric::Obscurity, Metric::Confidence] {
                let samples: Vec<Vec<f64>> = report.variants.iter().map(|v| values(&v.instances, group, metric)).collect();
                if let Ok(result) = kruskal_wallis(&samples) {
                    tests.kruskal_wallis.push(GroupTest { class_group: group, metric, result });
                }
            }
        }
        tests.comparisons = compare_variants(report, bonferroni_m)?;
    }
    report.tests = tests;
    report.warnings.extend(warnings);
    Ok(())
}

/// Settings for measuring multiplicity from imported score tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRunConfig {
    pub epsilon: f64,
    pub methods: Vec<Variant>,
    pub threshold: ThresholdPolicy,
    pub bonferroni_m: Option<usize>,
    pub selection_split: SplitTag,
}

impl Default for ScoreRunConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            methods: Vec::new(),
            threshold: ThresholdPolicy::default(),
            bonferroni_m: None,
            selection_split: SplitTag::Test,
        }
    }
}

/// Read an `instance_id,label` table with labels 0 or 1.
pub fn read_label_table<R: Read>(reader: R) -> Result<Vec<(String, u8)>> {
    let bad = |m: String| PipelineError::Data(DataError::Shape(m));
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers().map_err(DataError::from)?.iter().map(str::to_owned).collect();
    if header != ["instance_id", "label"] {
        return Err(bad(format!("label table header must be instance_id,label, found {}", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(DataError::from)?;
        let y = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("label `{other}` for instance {} is not 0 or 1", &rec[0]))),
        };
        out.push((rec[0].to_owned(), y));
    }
    Ok(out)
}

/// Measure multiplicity on imported scores, bypassing the zoo. The test
/// split is evaluated; the calibration split, when present, feeds the
/// calibration methods and max-F1 thresholds. Class groups come from the
/// full label table.
pub fn run_on_scores(
    name: &str,
    matrices: &[ScoreMatrix],
    labels: &[(String, u8)],
    cfg: &ScoreRunConfig,
) -> Result<MultiplicityReport> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(PipelineError::Config(format!("epsilon {} must lie in (0, 1)", cfg.epsilon)));
    }
    if cfg.bonferroni_m == Some(0) {
        return Err(PipelineError::Config("Bonferroni family size must be at least 1".into()));
    }
    let lookup: HashMap<&str, u8> = labels.iter().map(|(id, y)| (id.as_str(), *y)).collect();
    let all_labels: Vec<u8> = labels.iter().map(|(_, y)| *y).collect();
    let ratio = imbalance_ratio_of(&all_labels)?;
    let minority = minority_label(&all_labels);

    let find = |tag: SplitTag| matrices.iter().find(|m| m.split == tag);
    let labels_for = |m: &ScoreMatrix| -> Result<Vec<u8>> {
        m.instance_ids
            .iter()
            .map(|id| {
                lookup
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| PipelineError::Data(DataError::Shape(format!("no label for instance {id}"))))
            })
            .collect()
    };
    let test = find(SplitTag::Test).ok_or_else(|| PipelineError::Data(DataError::Shape("score table has no test split".into())))?;
    let test_labels = labels_for(test)?;
    let cal = find(SplitTag::Calibration);
    let cal_labels = cal.map(labels_for).transpose()?;
    if let Some(c) = cal {
        if c.model_ids != test.model_ids {
            return Err(PipelineError::Data(DataError::Shape("calibration and test splits list different models".into())));
        }
    }

    let set = match cfg.selection_split {
        SplitTag::Test => rashomon::build(test, &test_labels, cfg.epsilon)?,
        SplitTag::Calibration => {
            let (c, y) = cal.zip(cal_labels.as_ref()).ok_or_else(|| {
                PipelineError::Config("selection on the calibration split needs calibration scores".into())
            })?;
            rashomon::build(c, y, cfg.epsilon)?
        }
        SplitTag::Train => return Err(PipelineError::Config("Rashomon selection must use held-out data".into())),
    };

    let groups: Vec<ClassGroup> = test_labels.iter().map(|&y| ClassGroup::of(y, minority)).collect();
    let outcome = evaluate(
        &EvaluationInput {
            rashomon: &set,
            calibration: cal.zip(cal_labels.as_deref()),
            evaluation: test,
            eval_groups: &groups,
        },
        &cfg.methods,
        cfg.threshold,
    )?;

    let zoo_records = test
        .model_ids
        .iter()
        .enumerate()
        .map(|(k, id)| ModelRecord {
            id: id.clone(),
            params: None,
            training: None,
            train_auc: find(SplitTag::Train).and_then(|m| labels_for(m).ok().and_then(|y| auc(&m.scores[k], &y).ok())),
            calibration_auc: cal.zip(cal_labels.as_ref()).and_then(|(m, y)| auc(&m.scores[k], y).ok()),
            test_auc: auc(&test.scores[k], &test_labels).ok(),
            rashomon_member: set.contains(id),
        })
        .collect();

    let mut config = ExperimentConfig::new(DataSource::Table {
        path: PathBuf::from(name),
        target: "label".into(),
        positive: "1".into(),
        delimiter: ',',
    });
    config.n_models = test.n_models();
    config.epsilon = cfg.epsilon;
    config.methods = cfg.methods.clone();
    config.threshold = cfg.threshold;
    config.bonferroni_m = cfg.bonferroni_m;
    config.selection_split = cfg.selection_split;
    config.seed = 0;

    let mut report = MultiplicityReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
            timestamp: timestamp(),
            config,
        },
        dataset: DatasetSummary {
            name: name.to_owned(),
            n_rows: labels.len(),
            n_features: None,
            dropped_rows: 0,
            imbalance_ratio: ratio,
            minority_label: minority,
            positive_label_source: "1".into(),
            split_sizes: None,
            n_evaluated: test.n_instances(),
        },
        zoo: zoo_records,
        rashomon: set,
        variants: outcome.variants,
        tests: TestBattery::default(),
        warnings: outcome.warnings,
    };
    finish_tests(&mut report, cfg.bonferroni_m)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::ModelParams;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic(SynthSpec::new(400, 2.0, 0.5, 5));
        cfg.n_models = 6;
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.epsilon = 0.0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let mut cfg = small_cfg();
        cfg.n_models = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.methods = vec![Variant::Platt, Variant::Platt];
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.fractions = [0.5, 0.5, 0.5];
        assert!(cfg.validate().is_err());
        assert!(small_cfg().validate().is_ok());
    }

    #[test]
    fn data_errors_map_to_exit_code_two() {
        let cfg = ExperimentConfig::table("/no/such/file.csv", "class", "bad");
        assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn small_run_has_all_variants() {
        let report = run_experiment(&small_cfg()).unwrap();
        let names: Vec<EvalVariant> = report.variants.iter().map(|v| v.variant).collect();
        assert_eq!(names, vec![EvalVariant::Raw, EvalVariant::Platt, EvalVariant::Isotonic, EvalVariant::Temperature]);
        for v in &report.variants {
            assert_eq!(v.instances.len(), report.dataset.n_evaluated);
            assert_eq!(v.thresholds.len(), report.rashomon.len());
        }
        assert_eq!(report.tests.comparisons.len(), 12);
        assert_eq!(report.tests.bonferroni_m, 6);
        assert_eq!(report.zoo.len(), 6);
    }

    #[test]
    fn duplicate_models_show_no_multiplicity() {
        let mut cfg = small_cfg();
        let spec = ModelSpec { id: "a".into(), params: ModelParams::LinearLogistic { l2: 0.01 }, seed: 3 };
        cfg.models = Some(vec![spec.clone(), ModelSpec { id: "b".into(), ..spec }]);
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rashomon.len(), 2);
        for v in &report.variants {
            assert_eq!(v.discrepancy, 0.0);
            assert!(v.instances.iter().all(|m| m.obscurity == 0.0 && m.ambiguity == 0));
        }
    }

    #[test]
    fn compare_requires_calibrated_variant() {
        let mut cfg = small_cfg();
        cfg.methods.clear();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.tests.comparisons.is_empty());
        assert!(compare_variants(&report, None).is_err());
        let mut no_raw = report.clone();
        no_raw.variants.clear();
        assert!(compare_variants(&no_raw, None).is_err());
    }

    #[test]
    fn identical_variant_compares_as_no_change() {
        let report = run_experiment(&small_cfg()).unwrap();
        let mut twin = report.clone();
        let mut copy = twin.variants[0].clone();
        copy.variant = EvalVariant::Platt;
        twin.variants.truncate(1);
        twin.variants.push(copy);
        let rows = compare_variants(&twin, None).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.z == 0.0 && r.p_adj == 1.0));
    }

    #[test]
    fn label_table_parsing() {
        let rows = read_label_table("instance_id,label\na,1\nb,0\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![("a".into(), 1), ("b".into(), 0)]);
        assert!(read_label_table("instance_id,label\na,2\n".as_bytes()).is_err());
        assert!(read_label_table("id,y\n".as_bytes()).is_err());
    }
}
