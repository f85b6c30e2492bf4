//! Post-hoc probability calibration: Platt scaling, isotonic regression and
//! temperature scaling, fitted independently per model on a calibration
//! split.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zoo::{sigmoid, ScoreMatrix};

/// Probabilities are clamped to `[DELTA, 1 - DELTA]` before taking logits.
pub const DELTA: f64 = 1e-6;
pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
const PLATT_GRAD_TOL: f64 = 1e-8;
const PLATT_MAX_ITER: usize = 200;
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("calibration sample is empty")]
    Empty,
    #[error("Platt scaling needs both classes in the calibration labels")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("calibration and evaluation matrices list different models")]
    ModelMismatch,
    #[error("calibration failed for {}", .0.iter().map(|f| format!("{} ({})", f.model_id, f.reason)).collect::<Vec<_>>().join(", "))]
    Members(Vec<MemberFailure>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberFailure {
    pub model_id: String,
    pub reason: String,
}

pub type Result<T> = std::result::Result<T, CalibrateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Platt,
    Isotonic,
    Temperature,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Platt, Variant::Isotonic, Variant::Temperature];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Platt => "platt",
            Variant::Isotonic => "isotonic",
            Variant::Temperature => "temperature",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "platt" => Ok(Variant::Platt),
            "isotonic" => Ok(Variant::Isotonic),
            "temperature" => Ok(Variant::Temperature),
            other => Err(format!("unknown calibration method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum CalibratorParams {
    /// `g(p) = 1 / (1 + exp(a p + b))`.
    Platt { a: f64, b: f64 },
    /// Non-decreasing step function, one `(score, value)` per distinct
    /// calibration score; right-continuous between breakpoints.
    Isotonic { breakpoints: Vec<(f64, f64)> },
    /// `g(p) = sigmoid(logit(p) / t)`.
    Temperature { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Final value of the fitted objective (NLL or squared error).
    pub objective: f64,
    pub iterations: usize,
    /// The optimum lay outside the search range and was clamped.
    pub at_boundary: bool,
}

/// A fitted monotone probability transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub params: CalibratorParams,
    pub diagnostics: FitDiagnostics,
}

impl Calibrator {
    pub fn variant(&self) -> Variant {
        match self.params {
            CalibratorParams::Platt { .. } => Variant::Platt,
            CalibratorParams::Isotonic { .. } => Variant::Isotonic,
            CalibratorParams::Temperature { .. } => Variant::Temperature,
        }
    }

    pub fn transform(&self, p: f64) -> f64 {
        match &self.params {
            CalibratorParams::Platt { a, b } => sigmoid(-(a * p + b)),
            CalibratorParams::Isotonic { breakpoints } => {
                let k = breakpoints.partition_point(|&(s, _)| s <= p);
                breakpoints[k.saturating_sub(1)].1
            }
            CalibratorParams::Temperature { t } => {
                let q = sigmoid(logit(p) / t);
                // keep the side of 0.5 even when z / t underflows
                if p < 0.5 && q >= 0.5 {
                    0.5 - f64::EPSILON / 4.0
                } else {
                    q
                }
            }
        }
    }

    /// Transform a vector of probabilities.
    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&p| self.transform(p)).collect()
    }
}

/// Clamped log-odds.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(DELTA, 1.0 - DELTA);
    (p / (1.0 - p)).ln()
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn check_sample(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(CalibrateError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(CalibrateError::Empty);
    }
    Ok(())
}

/// Platt's smoothed targets: `(N+ + 1) / (N+ + 2)` for positives and
/// `1 / (N- + 2)` for negatives.
pub fn platt_targets(labels: &[u8]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&y| if y == 1 { hi } else { lo }).collect()
}

/// Negative log-likelihood of `(a, b)` against Platt targets.
pub fn platt_nll(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let u = a * p + b;
            softplus(u) - (1.0 - t) * u
        })
        .sum()
}

fn platt_gradient(scores: &[f64], targets: &[f64], a: f64, b: f64) -> ([f64; 2], [f64; 3]) {
    let (mut ga, mut gb) = (0.0, 0.0);
    let (mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0);
    for (&p, &t) in scores.iter().zip(targets) {
        let g = sigmoid(-(a * p + b));
        let r = t - g;
        ga += r * p;
        gb += r;
        let w = g * (1.0 - g);
        haa += w * p * p;
        hab += w * p;
        hbb += w;
    }
    ([ga, gb], [haa, hab, hbb])
}

/// Fit Platt scaling by damped Newton iterations on the smoothed-target
/// negative log-likelihood. Constant scores pin `a = 0` and solve for `b`.
pub fn fit_platt(scores: &[f64], labels: &[u8]) -> Result<Calibrator> {
    check_sample(scores, labels)?;
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(CalibrateError::SingleClass);
    }
    let targets = platt_targets(labels);

    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        let t_mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let b = ((1.0 - t_mean) / t_mean).ln();
        return Ok(Calibrator {
            params: CalibratorParams::Platt { a: 0.0, b },
            diagnostics: FitDiagnostics {
                objective: platt_nll(scores, &targets, 0.0, b),
                iterations: 0,
                at_boundary: false,
            },
        });
    }

    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let (mut a, mut b) = (0.0, ((neg + 1.0) / (pos + 1.0)).ln());
    let mut f = platt_nll(scores, &targets, a, b);
    let mut iterations = 0;
    while iterations < PLATT_MAX_ITER {
        let ([ga, gb], [haa, hab, hbb]) = platt_gradient(scores, &targets, a, b);
        if ga.hypot(gb) <= PLATT_GRAD_TOL {
            break;
        }
        iterations += 1;
        let (haa, hbb) = (haa + 1e-12, hbb + 1e-12);
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(-hab * ga + haa * gb) / det;
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(scores, &targets, na, nb);
            if nf <= f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
        if step < 1e-10 {
            break;
        }
    }
    Ok(Calibrator {
        params: CalibratorParams::Platt { a, b },
        diagnostics: FitDiagnostics { objective: f, iterations, at_boundary: false },
    })
}

/// Isotonic regression by pool-adjacent-violators. Equal scores are pooled
/// first, so the fit is a function of the score.
pub fn fit_isotonic(scores: &[f64], labels: &[u8]) -> Result<Calibrator> {
    check_sample(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // (score, weight, label sum) per distinct score
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        let y = f64::from(labels[i]);
        match points.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 += 1.0;
                last.2 += y;
            }
            _ => points.push((scores[i], 1.0, y)),
        }
    }

    // blocks: (weight, sum, number of points covered)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len());
    let mut merges = 0;
    for &(_, w, s) in &points {
        blocks.push((w, s, 1));
        while blocks.len() > 1 {
            let (w2, s2, c2) = blocks[blocks.len() - 1];
            let (w1, s1, c1) = blocks[blocks.len() - 2];
            // violation when mean1 > mean2
            if s1 * w2 <= s2 * w1 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (w1 + w2, s1 + s2, c1 + c2);
            merges += 1;
        }
    }

    let mut breakpoints = Vec::with_capacity(points.len());
    let mut k = 0;
    for &(w, s, c) in &blocks {
        let value = s / w;
        for _ in 0..c {
            breakpoints.push((points[k].0, value));
            k += 1;
        }
    }
    let objective = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let k = breakpoints.partition_point(|&(s, _)| s < p);
            (f64::from(y) - breakpoints[k].1).powi(2)
        })
        .sum();
    Ok(Calibrator {
        params: CalibratorParams::Isotonic { breakpoints },
        diagnostics: FitDiagnostics { objective, iterations: merges, at_boundary: false },
    })
}

/// Signed logits `(2y - 1) z` for a temperature fit.
fn signed_logits(scores: &[f64], labels: &[u8]) -> Vec<f64> {
    scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| if y == 1 { logit(p) } else { -logit(p) })
        .collect()
}

/// Negative log-likelihood of `sigmoid(logit(p) / t)`.
pub fn temperature_nll(scores: &[f64], labels: &[u8], t: f64) -> f64 {
    signed_logits(scores, labels).iter().map(|&sz| softplus(-sz / t)).sum()
}

/// Fit the temperature by golden-section search over `[T_MIN, T_MAX]`. The
/// objective is convex in `1 / t`, so it is unimodal in `t`; when its slope
/// at an end of the range shows the optimum lies beyond it, that end is
/// returned and flagged.
pub fn fit_temperature(scores: &[f64], labels: &[u8]) -> Result<Calibrator> {
    check_sample(scores, labels)?;
    let sz = signed_logits(scores, labels);
    let nll = |t: f64| sz.iter().map(|&v| softplus(-v / t)).sum::<f64>();
    // derivative of the objective with respect to u = 1 / t
    let slope_u = |u: f64| sz.iter().map(|&v| -v * sigmoid(-v * u)).sum::<f64>();

    let done = |t: f64, iterations: usize, at_boundary: bool| Calibrator {
        params: CalibratorParams::Temperature { t },
        diagnostics: FitDiagnostics { objective: nll(t), iterations, at_boundary },
    };
    if sz.iter().all(|&v| v == 0.0) {
        return Ok(done(1.0, 0, false));
    }
    if slope_u(1.0 / T_MIN) <= 0.0 {
        return Ok(done(T_MIN, 0, true));
    }
    if slope_u(1.0 / T_MAX) >= 0.0 {
        return Ok(done(T_MAX, 0, true));
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (T_MIN, T_MAX);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (nll(x1), nll(x2));
    let mut iterations = 0;
    while hi - lo > GOLDEN_TOL {
        iterations += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = nll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = nll(x2);
        }
    }
    Ok(done(0.5 * (lo + hi), iterations, false))
}

pub fn fit(variant: Variant, scores: &[f64], labels: &[u8]) -> Result<Calibrator> {
    match variant {
        Variant::Platt => fit_platt(scores, labels),
        Variant::Isotonic => fit_isotonic(scores, labels),
        Variant::Temperature => fit_temperature(scores, labels),
    }
}

/// Per-model calibrators and the transformed score matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedSet {
    pub variant: Variant,
    /// `(model_id, calibrator)` in matrix order.
    pub calibrators: Vec<(String, Calibrator)>,
    /// Calibrated scores on the calibration split.
    pub calibration: ScoreMatrix,
    /// Calibrated scores on the evaluation split.
    pub evaluation: ScoreMatrix,
}

/// Fit one calibrator per model on `cal` and transform both matrices.
pub fn calibrate_set(cal: &ScoreMatrix, eval: &ScoreMatrix, cal_labels: &[u8], variant: Variant) -> Result<CalibratedSet> {
    if cal.model_ids != eval.model_ids {
        return Err(CalibrateError::ModelMismatch);
    }
    if cal_labels.len() != cal.n_instances() {
        return Err(CalibrateError::LengthMismatch { scores: cal.n_instances(), labels: cal_labels.len() });
    }
    let fits: Vec<Result<Calibrator>> = cal.scores.par_iter().map(|row| fit(variant, row, cal_labels)).collect();
    let failures: Vec<MemberFailure> = fits
        .iter()
        .zip(&cal.model_ids)
        .filter_map(|(r, id)| {
            r.as_ref().err().map(|e| MemberFailure { model_id: id.clone(), reason: e.to_string() })
        })
        .collect();
    if !failures.is_empty() {
        return Err(CalibrateError::Members(failures));
    }
    let calibrators: Vec<Calibrator> = fits.into_iter().map(|r| r.expect("checked above")).collect();

    let transform = |m: &ScoreMatrix| {
        let scores = m.scores.iter().zip(&calibrators).map(|(row, c)| c.apply(row)).collect();
        ScoreMatrix { scores, ..m.clone() }
    };
    Ok(CalibratedSet {
        variant,
        calibration: transform(cal),
        evaluation: transform(eval),
        calibrators: cal.model_ids.iter().cloned().zip(calibrators).collect(),
    })
}
