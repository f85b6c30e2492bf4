//! Rank-based hypothesis tests and summary statistics: Wilcoxon rank-sum,
//! Pearson chi-squared on 2x2 tables, Kruskal-Wallis with Dunn post-hoc
//! comparisons, Bonferroni adjustment and the standard error of the mean.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

/// Largest pooled sample size for which the exact rank-sum distribution is
/// enumerated.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    EmptySample(usize),
    #[error("contingency table has a zero marginal")]
    ZeroMarginal,
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("comparison ({0}, {1}) references a missing group")]
    InvalidComparison(usize, usize),
    #[error("family size {m} is invalid for {count} p values")]
    InvalidFamilySize { m: usize, count: usize },
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `W`, `chi2`, `H` or `Z`.
    pub statistic_name: String,
    pub statistic: f64,
    /// Standard-normal statistic, when the test has one.
    pub z: Option<f64>,
    /// Mann-Whitney U of the first sample (rank-sum test only).
    pub u: Option<f64>,
    pub p_unadjusted: f64,
    pub p_adjusted: Option<f64>,
    pub n: Vec<usize>,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be smaller.
    Less,
    /// First sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSumOptions {
    /// Enumerate the exact null distribution when the pooled size is at most
    /// [`EXACT_MAX_N`] and there are no ties.
    pub allow_exact: bool,
    pub continuity_correction: bool,
}

impl Default for RankSumOptions {
    fn default() -> Self {
        Self { allow_exact: true, continuity_correction: true }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// 1-based mid-ranks of `values` and the sizes of every tie group with more
/// than one member.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Number of size-`k` subsets of `{1..=n}` with each possible rank sum.
fn rank_sum_counts(n: usize, k: usize) -> Vec<u64> {
    let max_sum = n * (n + 1) / 2;
    // counts[j][s]: subsets of size j with sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; k + 1];
    counts[0][0] = 1;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                counts[j][s] += counts[j - 1][s - r];
            }
        }
    }
    counts.swap_remove(k)
}

/// Wilcoxon rank-sum test of `x` against `y` with default options.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    wilcoxon_rank_sum_with(x, y, alternative, &RankSumOptions::default())
}

/// `W` is the rank sum of `x` under pooled mid-ranks. The p value is exact
/// for small tie-free samples, otherwise from the normal approximation with
/// tie-corrected variance. `z` is always the normal statistic.
pub fn wilcoxon_rank_sum_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    options: &RankSumOptions,
) -> Result<TestResult> {
    if x.is_empty() {
        return Err(StatsError::EmptySample(0));
    }
    if y.is_empty() {
        return Err(StatsError::EmptySample(1));
    }
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..nx].iter().sum();
    let u = w - (nx * (nx + 1)) as f64 / 2.0;

    let mu = (nx * ny) as f64 / 2.0;
    let var = (nx * ny) as f64 / 12.0 * ((n + 1) as f64 - tie_sum(&ties) / (n as f64 * (n as f64 - 1.0)));
    let d = u - mu;
    let cc = if options.continuity_correction { 0.5 } else { 0.0 };
    let norm = std_normal();
    let (z, p_normal) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let sd = var.sqrt();
        match alternative {
            Alternative::TwoSided => {
                let dd = (d.abs() - cc).max(0.0);
                let z = d.signum() * dd / sd;
                (z, (2.0 * norm.sf(dd / sd)).min(1.0))
            }
            Alternative::Greater => {
                let z = (d - cc) / sd;
                (z, norm.sf(z))
            }
            Alternative::Less => {
                let z = (d + cc) / sd;
                (z, norm.cdf(z))
            }
        }
    };

    let exact = options.allow_exact && n <= EXACT_MAX_N && ties.is_empty();
    let (p, method) = if exact {
        let counts = rank_sum_counts(n, nx);
        let total: u64 = counts.iter().sum();
        let w_int = w.round() as usize;
        let le: u64 = counts[..=w_int].iter().sum();
        let ge: u64 = counts[w_int..].iter().sum();
        let (le, ge) = (le as f64 / total as f64, ge as f64 / total as f64);
        let p = match alternative {
            Alternative::TwoSided => (2.0 * le.min(ge)).min(1.0),
            Alternative::Less => le,
            Alternative::Greater => ge,
        };
        (p, "exact enumeration of the rank-sum distribution".to_owned())
    } else {
        let mut m = "normal approximation, tie-corrected variance".to_owned();
        if options.continuity_correction {
            m.push_str(", continuity correction");
        }
        (p_normal, m)
    };

    Ok(TestResult {
        statistic_name: "W".into(),
        statistic: w,
        z: Some(z),
        u: Some(u),
        p_unadjusted: p.clamp(0.0, 1.0),
        p_adjusted: None,
        n: vec![nx, ny],
        method,
    })
}

/// Pearson chi-squared test of independence on `[[a, b], [c, d]]`, no
/// continuity correction.
pub fn chi_squared_independence(table: [[u64; 2]; 2]) -> Result<TestResult> {
    chi_squared_independence_with(table, false)
}

pub fn chi_squared_independence_with(table: [[u64; 2]; 2], yates: bool) -> Result<TestResult> {
    let [[a, b], [c, d]] = table.map(|r| r.map(|v| v as f64));
    let margins = [a + b, c + d, a + c, b + d];
    if margins.contains(&0.0) {
        return Err(StatsError::ZeroMarginal);
    }
    let n = a + b + c + d;
    let mut diff = (a * d - b * c).abs();
    if yates {
        diff = (diff - n / 2.0).max(0.0);
    }
    let chi2 = n * diff * diff / margins.iter().product::<f64>();
    let p = ChiSquared::new(1.0).expect("df = 1").sf(chi2);
    Ok(TestResult {
        statistic_name: "chi2".into(),
        statistic: chi2,
        z: None,
        u: None,
        p_unadjusted: p.clamp(0.0, 1.0),
        p_adjusted: None,
        n: vec![n as usize],
        method: if yates { "Pearson, df = 1, Yates correction" } else { "Pearson, df = 1" }.into(),
    })
}

fn check_groups<G: AsRef<[f64]>>(groups: &[G]) -> Result<()> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(k) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptySample(k));
    }
    Ok(())
}

struct PooledRanks {
    mean_ranks: Vec<f64>,
    rank_sums: Vec<f64>,
    sizes: Vec<usize>,
    n: usize,
    tie_sum: f64,
}

fn pooled_ranks<G: AsRef<[f64]>>(groups: &[G]) -> PooledRanks {
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let (ranks, ties) = midranks(&pooled);
    let mut rank_sums = Vec::with_capacity(groups.len());
    let mut sizes = Vec::with_capacity(groups.len());
    let mut start = 0;
    for g in groups {
        let len = g.as_ref().len();
        rank_sums.push(ranks[start..start + len].iter().sum::<f64>());
        sizes.push(len);
        start += len;
    }
    PooledRanks {
        mean_ranks: rank_sums.iter().zip(&sizes).map(|(r, &s)| r / s as f64).collect(),
        rank_sums,
        sizes,
        n: pooled.len(),
        tie_sum: tie_sum(&ties),
    }
}

/// Kruskal-Wallis H with tie correction, chi-squared with `k - 1` df.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult> {
    check_groups(groups)?;
    let pr = pooled_ranks(groups);
    let n = pr.n as f64;
    let raw = 12.0 / (n * (n + 1.0))
        * pr.rank_sums.iter().zip(&pr.sizes).map(|(r, &s)| r * r / s as f64).sum::<f64>()
        - 3.0 * (n + 1.0);
    let correction = 1.0 - pr.tie_sum / (n * n * n - n);
    let h = if correction > 0.0 { (raw / correction).max(0.0) } else { 0.0 };
    let df = (groups.len() - 1) as f64;
    Ok(TestResult {
        statistic_name: "H".into(),
        statistic: h,
        z: None,
        u: None,
        p_unadjusted: ChiSquared::new(df).expect("df >= 1").sf(h).clamp(0.0, 1.0),
        p_adjusted: None,
        n: pr.sizes,
        method: "Kruskal-Wallis, tie-corrected".into(),
    })
}

/// Dunn's pairwise comparisons on pooled mid-ranks over all `groups`. For
/// each requested `(i, j)`,
/// `Z = (meanrank_i - meanrank_j) / sqrt(S2 (1/n_i + 1/n_j))` with
/// `S2 = N(N+1)/12 - sum(t^3 - t) / (12 (N - 1))`; p values are two-sided
/// and unadjusted.
pub fn dunn_test<G: AsRef<[f64]>>(groups: &[G], comparisons: &[(usize, usize)]) -> Result<Vec<TestResult>> {
    check_groups(groups)?;
    if let Some(&(i, j)) = comparisons.iter().find(|(i, j)| *i >= groups.len() || *j >= groups.len()) {
        return Err(StatsError::InvalidComparison(i, j));
    }
    let pr = pooled_ranks(groups);
    let n = pr.n as f64;
    let s2 = n * (n + 1.0) / 12.0 - pr.tie_sum / (12.0 * (n - 1.0));
    let norm = std_normal();
    Ok(comparisons
        .iter()
        .map(|&(i, j)| {
            let diff = pr.mean_ranks[i] - pr.mean_ranks[j];
            let var = s2 * (1.0 / pr.sizes[i] as f64 + 1.0 / pr.sizes[j] as f64);
            let z = if var > 0.0 { diff / var.sqrt() } else { 0.0 };
            let p = (2.0 * norm.sf(z.abs())).min(1.0);
            TestResult {
                statistic_name: "Z".into(),
                statistic: z,
                z: Some(z),
                u: None,
                p_unadjusted: p,
                p_adjusted: None,
                n: vec![pr.sizes[i], pr.sizes[j]],
                method: format!("Dunn, pooled mid-ranks over {} groups, tie-corrected", groups.len()),
            }
        })
        .collect())
}

/// `min(1, m p)` for each p value.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 1 || m < p_values.len() {
        return Err(StatsError::InvalidFamilySize { m, count: p_values.len() });
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

/// Standard error of the mean with the `n - 1` denominator; zero for a
/// single value.
pub fn sem(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(StatsError::EmptySample(0));
    }
    let n = values.len();
    if n == 1 {
        return Ok(0.0);
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}
