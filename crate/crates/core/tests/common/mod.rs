//! Independent reference implementations shared by the integration suites.
//! None of these call into the library's algorithms.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Pairwise concordance AUC: 1 per correctly ordered pair, 0.5 per tie.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

pub fn discrepancy_pairs(labels: &[Vec<u8>]) -> f64 {
    let n = labels[0].len() as f64;
    let mut best = 0.0f64;
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            let d = labels[a].iter().zip(&labels[b]).filter(|(x, y)| x != y).count() as f64;
            best = best.max(d / n);
        }
    }
    best
}

/// Share of non-best models disagreeing with the best one at `i`.
pub fn obscurity_direct(labels: &[Vec<u8>], best: usize, i: usize) -> f64 {
    if labels.len() < 2 {
        return 0.0;
    }
    let mut disagree = 0usize;
    for (m, row) in labels.iter().enumerate() {
        if m != best && row[i] != labels[best][i] {
            disagree += 1;
        }
    }
    disagree as f64 / (labels.len() - 1) as f64
}

/// Least monotone squared error by enumerating every contiguous partition of
/// the distinct scores (tied scores are one weighted point).
pub fn isotonic_sse_bruteforce(scores: &[f64], labels: &[u8]) -> f64 {
    let mut pts: Vec<(f64, f64)> = scores.iter().zip(labels).map(|(&s, &y)| (s, f64::from(y))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut last = f64::NAN;
    for (s, y) in pts {
        if s == last {
            groups.last_mut().unwrap().push(y);
        } else {
            groups.push(vec![y]);
            last = s;
        }
    }
    let k = groups.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (k - 1)) {
        // bit j set: cut between groups j and j + 1
        let mut blocks: Vec<Vec<f64>> = vec![Vec::new()];
        for (j, g) in groups.iter().enumerate() {
            blocks.last_mut().unwrap().extend(g);
            if j + 1 < k && mask & (1 << j) != 0 {
                blocks.push(Vec::new());
            }
        }
        let means: Vec<f64> = blocks.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).collect();
        if means.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let sse: f64 = blocks
            .iter()
            .zip(&means)
            .map(|(b, m)| b.iter().map(|y| (y - m).powi(2)).sum::<f64>())
            .sum();
        best = best.min(sse);
    }
    best
}

/// Two-sided exact rank-sum p-value by enumerating every assignment of the
/// pooled ranks to the first sample. Samples must be tie-free.
pub fn rank_sum_p_enumerated(x: &[f64], y: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let rank = |v: f64| (pooled.iter().position(|&p| p == v).unwrap() + 1) as f64;
    let observed: f64 = x.iter().map(|&v| rank(v)).sum();
    let n = pooled.len();
    let nx = x.len();
    let center = nx as f64 * (n as f64 + 1.0) / 2.0;
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != nx {
            continue;
        }
        total += 1;
        let w: f64 = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| (b + 1) as f64).sum();
        if (w - center).abs() >= (observed - center).abs() - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Central finite difference.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Labels drawn as Bernoulli(score), with both classes forced present.
pub fn bernoulli_labels(rng: &mut ChaCha8Rng, scores: &[f64]) -> Vec<u8> {
    let mut y: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random::<f64>() < s)).collect();
    if y.iter().all(|&v| v == y[0]) {
        let flip = rng.random_range(0..y.len());
        y[flip] = 1 - y[0];
    }
    y
}
