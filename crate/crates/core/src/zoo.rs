//! A small pool of from-scratch binary classifiers, scoring, and AUC.
//!
//! Three families are provided: L2-regularized logistic regression fitted
//! by gradient descent, bagged CART trees with Gini splits whose output is
//! the fraction of trees voting positive, and gradient-boosted depth-1
//! trees on the logistic loss. Each model's randomness comes only from its
//! own `seed`, so training order and thread count never change results.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DatasetView, SplitTag};
use crate::stats::midranks;

/// Log-loss probability guard.
pub const PROB_CLAMP: f64 = 1e-12;
const LOGISTIC_GRAD_TOL: f64 = 1e-6;
const LOGISTIC_MAX_ITER: usize = 5000;
/// Ridge term added to stump leaf Hessian sums.
const STUMP_LAMBDA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("training data is empty")]
    Empty,
    #[error("invalid hyperparameters for {id}: {reason}")]
    InvalidSpec { id: String, reason: String },
    #[error("model {model} expects {expected} features, data has {found}")]
    DimensionMismatch { model: String, expected: usize, found: usize },
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("malformed score matrix: {0}")]
    Shape(String),
    #[error("score table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ZooError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    LinearLogistic,
    BaggedTrees,
    BoostedStumps,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::LinearLogistic => "linear-logistic",
            ModelFamily::BaggedTrees => "bagged-trees",
            ModelFamily::BoostedStumps => "boosted-stumps",
        })
    }
}

/// Family-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelParams {
    LinearLogistic {
        /// L2 penalty on the weights (not the intercept), `>= 0`.
        l2: f64,
    },
    BaggedTrees {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        /// Fraction of features tried at each split, in `(0, 1]`.
        max_features: f64,
    },
    BoostedStumps {
        n_rounds: usize,
        learning_rate: f64,
        /// Row fraction sampled (without replacement) per round, in `(0, 1]`.
        subsample: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn family(&self) -> ModelFamily {
        match self.params {
            ModelParams::LinearLogistic { .. } => ModelFamily::LinearLogistic,
            ModelParams::BaggedTrees { .. } => ModelFamily::BaggedTrees,
            ModelParams::BoostedStumps { .. } => ModelFamily::BoostedStumps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(ZooError::InvalidSpec {
                id: self.id.clone(),
                reason: reason.to_owned(),
            })
        };
        match self.params {
            ModelParams::LinearLogistic { l2 } => {
                if !(l2.is_finite() && l2 >= 0.0) {
                    return bad("l2 must be finite and >= 0");
                }
            }
            ModelParams::BaggedTrees { n_trees, max_depth, min_leaf, max_features } => {
                if !(1..=1000).contains(&n_trees) {
                    return bad("n_trees must lie in 1..=1000");
                }
                if !(1..=20).contains(&max_depth) {
                    return bad("max_depth must lie in 1..=20");
                }
                if min_leaf == 0 {
                    return bad("min_leaf must be >= 1");
                }
                if !(max_features > 0.0 && max_features <= 1.0) {
                    return bad("max_features must lie in (0, 1]");
                }
            }
            ModelParams::BoostedStumps { n_rounds, learning_rate, subsample } => {
                if !(1..=5000).contains(&n_rounds) {
                    return bad("n_rounds must lie in 1..=5000");
                }
                if !(learning_rate > 0.0 && learning_rate <= 1.0) {
                    return bad("learning_rate must lie in (0, 1]");
                }
                if !(subsample > 0.0 && subsample <= 1.0) {
                    return bad("subsample must lie in (0, 1]");
                }
            }
        }
        Ok(())
    }
}

const L2_GRID: [f64; 7] = [1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3];
const DEPTH_GRID: [usize; 6] = [3, 4, 5, 6, 8, 10];
const TREES_GRID: [usize; 3] = [25, 40, 60];
const MIN_LEAF_GRID: [usize; 4] = [1, 3, 5, 10];
const MAX_FEATURES_GRID: [f64; 3] = [0.3, 0.5, 0.7];
const ROUNDS_GRID: [usize; 5] = [50, 100, 150, 200, 300];
const LR_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];
const SUBSAMPLE_GRID: [f64; 3] = [0.6, 0.8, 1.0];

/// `n_models` specs cycling linear-logistic, bagged-trees, boosted-stumps,
/// with hyperparameters drawn from fixed grids and per-spec seeds, all
/// derived from `seed`.
pub fn default_zoo(n_models: usize, seed: u64) -> Vec<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |len: usize| rng.random_range(0..len);
    let mut specs = Vec::with_capacity(n_models);
    for i in 0..n_models {
        let params = match i % 3 {
            0 => ModelParams::LinearLogistic { l2: L2_GRID[pick(L2_GRID.len())] },
            1 => ModelParams::BaggedTrees {
                n_trees: TREES_GRID[pick(TREES_GRID.len())],
                max_depth: DEPTH_GRID[pick(DEPTH_GRID.len())],
                min_leaf: MIN_LEAF_GRID[pick(MIN_LEAF_GRID.len())],
                max_features: MAX_FEATURES_GRID[pick(MAX_FEATURES_GRID.len())],
            },
            _ => ModelParams::BoostedStumps {
                n_rounds: ROUNDS_GRID[pick(ROUNDS_GRID.len())],
                learning_rate: LR_GRID[pick(LR_GRID.len())],
                subsample: SUBSAMPLE_GRID[pick(SUBSAMPLE_GRID.len())],
            },
        };
        let spec_seed = pick(usize::MAX) as u64;
        let family = match i % 3 {
            0 => ModelFamily::LinearLogistic,
            1 => ModelFamily::BaggedTrees,
            _ => ModelFamily::BoostedStumps,
        };
        specs.push(ModelSpec {
            id: format!("m{i:02}-{family}"),
            params,
            seed: spec_seed,
        });
    }
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    /// Mean training log loss with probabilities clamped to `[1e-12, 1 - 1e-12]`.
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Linear {
        mean: Vec<f64>,
        scale: Vec<f64>,
        weights: Vec<f64>,
        bias: f64,
    },
    Forest(Vec<Tree>),
    Stumps { base: f64, stumps: Vec<Stump> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub summary: TrainingSummary,
    fitted: Fitted,
}

impl TrainedModel {
    pub fn id(&self) -> &str {
        &self.spec.id
    }

    /// Probability of the positive class for one feature row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Linear { mean, scale, weights, bias } => {
                let z = bias
                    + x.iter()
                        .zip(mean.iter().zip(scale))
                        .zip(weights)
                        .map(|((v, (m, s)), w)| w * (v - m) / s)
                        .sum::<f64>();
                sigmoid(z)
            }
            Fitted::Forest(trees) => {
                let votes = trees.iter().filter(|t| t.predict(x) == 1).count();
                votes as f64 / trees.len() as f64
            }
            Fitted::Stumps { base, stumps } => {
                let lr = match self.spec.params {
                    ModelParams::BoostedStumps { learning_rate, .. } => learning_rate,
                    _ => unreachable!("stump ensemble with non-boosting spec"),
                };
                sigmoid(base + lr * stumps.iter().map(|s| s.eval(x)).sum::<f64>())
            }
        }
    }

    pub fn predict_view(&self, data: &DatasetView<'_>) -> Vec<f64> {
        (0..data.len()).map(|i| self.predict(data.row(i))).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_loss(p: &[f64], y: &[u8]) -> f64 {
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / p.len() as f64
}

/// Fit one model on `data`.
pub fn train(spec: &ModelSpec, data: &DatasetView<'_>) -> Result<TrainedModel> {
    spec.validate()?;
    if data.is_empty() {
        return Err(ZooError::Empty);
    }
    let labels = data.labels();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(ZooError::SingleClass);
    }
    let rows: Vec<&[f64]> = (0..data.len()).map(|i| data.row(i)).collect();
    let (fitted, iterations) = match spec.params {
        ModelParams::LinearLogistic { l2 } => fit_logistic(&rows, &labels, l2),
        ModelParams::BaggedTrees { n_trees, max_depth, min_leaf, max_features } => {
            let cfg = TreeConfig { max_depth, min_leaf, max_features };
            (fit_forest(&rows, &labels, n_trees, &cfg, spec.seed), n_trees)
        }
        ModelParams::BoostedStumps { n_rounds, learning_rate, subsample } => {
            (fit_stumps(&rows, &labels, n_rounds, learning_rate, subsample, spec.seed), n_rounds)
        }
    };
    let mut model = TrainedModel {
        spec: spec.clone(),
        n_features: data.n_features(),
        summary: TrainingSummary { iterations, final_loss: 0.0 },
        fitted,
    };
    let p: Vec<f64> = rows.iter().map(|x| model.predict(x)).collect();
    model.summary.final_loss = log_loss(&p, &labels);
    Ok(model)
}

/// Train every spec; runs in parallel but the result order follows `specs`.
pub fn train_all(specs: &[ModelSpec], data: &DatasetView<'_>) -> Result<Vec<TrainedModel>> {
    specs.par_iter().map(|s| train(s, data)).collect()
}

fn fit_logistic(rows: &[&[f64]], y: &[u8], l2: f64) -> (Fitted, usize) {
    let n = rows.len();
    let d = rows[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / nf;
        }
    }
    let mut scale = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            scale[j] += (r[j] - mean[j]).powi(2) / nf;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let objective = |w: &[f64], b: f64| -> f64 {
        let mut total = 0.0;
        for (xi, &yi) in x.iter().zip(&yf) {
            let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            // log(1 + e^z) - y z, stable form
            total += if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() } - yi * z;
        }
        total / nf + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    };
    let gradient = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(&yf) {
            let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            let r = (sigmoid(z) - yi) / nf;
            gb += r;
            for (g, a) in gw.iter_mut().zip(xi) {
                *g += r * a;
            }
        }
        for (g, wj) in gw.iter_mut().zip(w) {
            *g += l2 * wj;
        }
        (gw, gb)
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    let mut f = objective(&w, b);
    let mut iterations = 0;
    while iterations < LOGISTIC_MAX_ITER {
        let (gw, gb) = gradient(&w, b);
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() <= LOGISTIC_GRAD_TOL {
            break;
        }
        iterations += 1;
        // Armijo backtracking, letting the step grow again after a success
        step *= 2.0;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let b_new = b - step * gb;
            let f_new = objective(&w_new, b_new);
            if f_new <= f - 0.5 * step * gnorm2 || step < 1e-12 {
                w = w_new;
                b = b_new;
                f = f_new;
                break;
            }
            step *= 0.5;
        }
    }
    (Fitted::Linear { mean, scale, weights: w, bias: b }, iterations)
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct TreeConfig {
    max_depth: usize,
    min_leaf: usize,
    max_features: f64,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn fit_forest(rows: &[&[f64]], y: &[u8], n_trees: usize, cfg: &TreeConfig, seed: u64) -> Fitted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows.len();
    let trees = (0..n_trees)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut tree = Tree { nodes: Vec::new() };
            grow(&mut tree, rows, y, &mut idx, 0, cfg, &mut rng);
            tree
        })
        .collect();
    Fitted::Forest(trees)
}

fn grow(
    tree: &mut Tree,
    rows: &[&[f64]],
    y: &[u8],
    idx: &mut [usize],
    depth: usize,
    cfg: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| y[i] == 1).count();
    let node = tree.nodes.len();
    // ties vote positive
    tree.nodes.push(TreeNode::Leaf(u8::from(2 * pos >= n)));
    if depth >= cfg.max_depth || pos == 0 || pos == n || n < 2 * cfg.min_leaf {
        return node;
    }

    let d = rows[0].len();
    let k = ((cfg.max_features * d as f64).ceil() as usize).clamp(1, d);
    let candidates = sample(rng, d, k).into_vec();
    let parent = gini(pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in &candidates {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (rows[i][f], y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for s in 1..n {
            left_pos += usize::from(pairs[s - 1].1);
            if pairs[s - 1].0 == pairs[s].0 || s < cfg.min_leaf || n - s < cfg.min_leaf {
                continue;
            }
            let impurity =
                (s as f64 * gini(left_pos, s) + (n - s) as f64 * gini(pos - left_pos, n - s)) / n as f64;
            if best.is_none_or(|(b, _, _)| impurity < b) {
                best = Some((impurity, f, 0.5 * (pairs[s - 1].0 + pairs[s].0)));
            }
        }
    }
    let Some((impurity, feature, threshold)) = best else {
        return node;
    };
    if impurity >= parent - 1e-12 {
        return node;
    }

    let mut split = 0;
    for i in 0..n {
        if rows[idx[i]][feature] <= threshold {
            idx.swap(i, split);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    let left = grow(tree, rows, y, l, depth + 1, cfg, rng);
    let right = grow(tree, rows, y, r, depth + 1, cfg, rng);
    tree.nodes[node] = TreeNode::Split { feature, threshold, left, right };
    node
}

#[derive(Debug, Clone, PartialEq)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

impl Stump {
    fn eval(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

fn fit_stumps(rows: &[&[f64]], y: &[u8], n_rounds: usize, lr: f64, subsample: f64, seed: u64) -> Fitted {
    let n = rows.len();
    let d = rows[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
    let base = (prior / (1.0 - prior)).ln();
    let order: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]));
            o
        })
        .collect();

    let mut margin = vec![base; n];
    let mut stumps = Vec::with_capacity(n_rounds);
    let m = ((subsample * n as f64).round() as usize).clamp(1, n);
    let mut in_bag = vec![false; n];
    for _ in 0..n_rounds {
        in_bag.fill(m == n);
        if m < n {
            for i in sample(&mut rng, n, m) {
                in_bag[i] = true;
            }
        }
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for i in 0..n {
            if in_bag[i] {
                let p = sigmoid(margin[i]);
                g[i] = f64::from(y[i]) - p;
                h[i] = p * (1.0 - p);
            }
        }
        let g_tot: f64 = g.iter().sum();
        let h_tot: f64 = h.iter().sum();
        let score = |gs: f64, hs: f64| gs * gs / (hs + STUMP_LAMBDA);

        let mut best = Stump {
            feature: 0,
            threshold: f64::INFINITY,
            left: g_tot / (h_tot + STUMP_LAMBDA),
            right: 0.0,
        };
        let mut best_gain = 0.0;
        for (f, o) in order.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut prev: Option<usize> = None;
            for &i in o.iter().filter(|&&i| in_bag[i]) {
                if let Some(p) = prev {
                    if rows[p][f] < rows[i][f] {
                        let gain = score(gl, hl) + score(g_tot - gl, h_tot - hl) - score(g_tot, h_tot);
                        if gain > best_gain + 1e-12 {
                            best_gain = gain;
                            best = Stump {
                                feature: f,
                                threshold: 0.5 * (rows[p][f] + rows[i][f]),
                                left: gl / (hl + STUMP_LAMBDA),
                                right: (g_tot - gl) / (h_tot - hl + STUMP_LAMBDA),
                            };
                        }
                    }
                }
                gl += g[i];
                hl += h[i];
                prev = Some(i);
            }
        }
        for (mi, x) in margin.iter_mut().zip(rows) {
            *mi += lr * best.eval(x);
        }
        stumps.push(best);
    }
    Fitted::Stumps { base, stumps }
}

/// Model-by-instance grid of positive-class probabilities on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub model_ids: Vec<String>,
    pub instance_ids: Vec<String>,
    /// `scores[m][i]`: probability from model `m` for instance `i`.
    pub scores: Vec<Vec<f64>>,
    pub split: SplitTag,
}

impl ScoreMatrix {
    pub fn new(
        model_ids: Vec<String>,
        instance_ids: Vec<String>,
        scores: Vec<Vec<f64>>,
        split: SplitTag,
    ) -> Result<Self> {
        if scores.len() != model_ids.len() {
            return Err(ZooError::Shape(format!("{} rows for {} models", scores.len(), model_ids.len())));
        }
        if let Some(r) = scores.iter().find(|r| r.len() != instance_ids.len()) {
            return Err(ZooError::Shape(format!("row of {} for {} instances", r.len(), instance_ids.len())));
        }
        if let Some(v) = scores.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ZooError::Shape(format!("score {v} outside [0, 1]")));
        }
        Ok(Self { model_ids, instance_ids, scores, split })
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.model_ids.iter().position(|m| m == id).map(|k| self.scores[k].as_slice())
    }

    /// Scores of every model for instance `i`.
    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().map(move |r| r[i])
    }
}

/// Score `data` with every model, in input order.
pub fn score(models: &[TrainedModel], data: &DatasetView<'_>, split: SplitTag) -> Result<ScoreMatrix> {
    for m in models {
        if m.n_features != data.n_features() {
            return Err(ZooError::DimensionMismatch {
                model: m.id().to_owned(),
                expected: m.n_features,
                found: data.n_features(),
            });
        }
    }
    let scores = models.par_iter().map(|m| m.predict_view(data)).collect();
    ScoreMatrix::new(
        models.iter().map(|m| m.id().to_owned()).collect(),
        data.instance_ids(),
        scores,
        split,
    )
}

/// Area under the ROC curve as the Mann-Whitney probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(ZooError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ZooError::SingleClass);
    }
    let (ranks, _) = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub const SCORE_TABLE_HEADER: [&str; 4] = ["model_id", "instance_id", "split", "score"];

/// Write matrices as `model_id,instance_id,split,score` rows.
pub fn write_score_table<W: Write>(writer: W, matrices: &[&ScoreMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_TABLE_HEADER)?;
    for m in matrices {
        let split = m.split.to_string();
        for (model, row) in m.model_ids.iter().zip(&m.scores) {
            for (inst, s) in m.instance_ids.iter().zip(row) {
                w.write_record([model.as_str(), inst.as_str(), split.as_str(), &s.to_string()])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a score table into one matrix per split, ordered train,
/// calibration, test. Models and instances keep first-appearance order and
/// every split must contain the full model-by-instance grid.
pub fn read_score_table<R: Read>(reader: R) -> Result<Vec<ScoreMatrix>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != SCORE_TABLE_HEADER {
        return Err(ZooError::Table(format!("expected header {}, found {}", SCORE_TABLE_HEADER.join(","), header.join(","))));
    }

    struct Partial {
        models: Vec<String>,
        model_pos: HashMap<String, usize>,
        instances: Vec<String>,
        inst_pos: HashMap<String, usize>,
        cells: HashMap<(usize, usize), f64>,
    }
    let mut splits: Vec<(SplitTag, Partial)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let at = |msg: String| ZooError::Table(format!("row {}: {msg}", line + 2));
        let split: SplitTag = rec[2].parse().map_err(at)?;
        let value: f64 = rec[3].parse().map_err(|e| at(format!("bad score `{}`: {e}", &rec[3])))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(at(format!("score {value} outside [0, 1]")));
        }
        let part = match splits.iter().position(|(t, _)| *t == split) {
            Some(k) => &mut splits[k].1,
            None => {
                splits.push((
                    split,
                    Partial {
                        models: Vec::new(),
                        model_pos: HashMap::new(),
                        instances: Vec::new(),
                        inst_pos: HashMap::new(),
                        cells: HashMap::new(),
                    },
                ));
                &mut splits.last_mut().expect("just pushed").1
            }
        };
        let mk = *part.model_pos.entry(rec[0].to_owned()).or_insert_with(|| {
            part.models.push(rec[0].to_owned());
            part.models.len() - 1
        });
        let ik = *part.inst_pos.entry(rec[1].to_owned()).or_insert_with(|| {
            part.instances.push(rec[1].to_owned());
            part.instances.len() - 1
        });
        if part.cells.insert((mk, ik), value).is_some() {
            return Err(at(format!("duplicate entry for model {} instance {}", &rec[0], &rec[1])));
        }
    }

    splits.sort_by_key(|(t, _)| *t);
    splits
        .into_iter()
        .map(|(split, p)| {
            let mut scores = vec![vec![0.0; p.instances.len()]; p.models.len()];
            for (mk, row) in scores.iter_mut().enumerate() {
                for (ik, cell) in row.iter_mut().enumerate() {
                    *cell = *p.cells.get(&(mk, ik)).ok_or_else(|| {
                        ZooError::Table(format!(
                            "{split} split is missing model {} instance {}",
                            p.models[mk], p.instances[ik]
                        ))
                    })?;
                }
            }
            ScoreMatrix::new(p.models, p.instances, scores, split)
        })
        .collect()
}
