mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rashomon_calib::calibrate::{fit_isotonic, fit_platt, fit_temperature, CalibratorParams, T_MAX, T_MIN};
use rashomon_calib::data::{label_counts, stratified_split, synthesize, SplitTag};
use rashomon_calib::multiplicity::{
    ambiguity, confidence, discrepancy, harden, obscurity, LabelMatrix, ThresholdPolicy,
};
use rashomon_calib::rashomon;
use rashomon_calib::stats::{
    bonferroni, chi_squared_independence, dunn_test, wilcoxon_rank_sum, wilcoxon_rank_sum_with, Alternative,
    RankSumOptions,
};
use rashomon_calib::zoo::{auc, ScoreMatrix};

fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
    let ids = (0..rows.len()).map(|k| format!("m{k}")).collect();
    let inst = (0..rows[0].len()).map(|i| i.to_string()).collect();
    ScoreMatrix::new(ids, inst, rows, SplitTag::Test).unwrap()
}

fn labels_with_both(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, n).prop_filter("both classes", |y| y.contains(&0) && y.contains(&1))
}

/// Score matrix with `models x instances` entries on a coarse grid, so ties occur.
fn score_rows(models: std::ops::RangeInclusive<usize>, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((0u32..=20).prop_map(|k| f64::from(k) / 20.0), n), models)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_stratified_partition(n in 60usize..300, imbalance in 1.0f64..4.0, seed in 0u64..1000) {
        let d = synthesize(n, imbalance, 0.5, seed).unwrap();
        let s = stratified_split(&d, [0.6, 0.2, 0.2], seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.calibration).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        let total = label_counts(&d.labels);
        let pos_share = total[&1] as f64 / n as f64;
        for tag in [SplitTag::Train, SplitTag::Calibration, SplitTag::Test] {
            let rows = s.rows(tag);
            let pos = rows.iter().filter(|&&r| d.labels[r] == 1).count();
            prop_assert!(pos > 0 && pos < rows.len());
            // proportional up to rounding and the class-presence repair
            prop_assert!((pos as f64 - pos_share * rows.len() as f64).abs() <= 2.0);
        }
        prop_assert_eq!(&s, &stratified_split(&d, [0.6, 0.2, 0.2], seed).unwrap());
    }

    #[test]
    fn auc_matches_pair_count(ks in prop::collection::vec(0u32..50, 20), y in labels_with_both(20)) {
        let s: Vec<f64> = ks.iter().map(|&k| f64::from(k) / 50.0).collect();
        let a = auc(&s, &y).unwrap();
        prop_assert!((a - auc_pairs(&s, &y)).abs() < 1e-12);
        let flipped: Vec<u8> = y.iter().map(|&v| 1 - v).collect();
        prop_assert!((a + auc(&s, &flipped).unwrap() - 1.0).abs() < 1e-12);
        // strictly increasing transform
        let sq: Vec<f64> = ks.iter().map(|&k| f64::from(k * k) / 2500.0).collect();
        prop_assert_eq!(a, auc(&sq, &y).unwrap());
    }

    #[test]
    fn rashomon_membership_grows_with_epsilon(
        rows in score_rows(2..=8, 24),
        y in labels_with_both(24),
        e1 in 0.001f64..0.5,
        e2 in 0.001f64..0.5,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let sm = matrix(rows);
        let small = rashomon::build(&sm, &y, lo).unwrap();
        let large = rashomon::build(&sm, &y, hi).unwrap();
        prop_assert!(small.member_ids.iter().all(|m| large.contains(m)));
        prop_assert_eq!(&small.best_id, &large.best_id);
        prop_assert!(small.contains(&small.best_id));
        let best = small.candidate_aucs.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(small.best_auc, best);
        prop_assert!(small.aucs.iter().all(|&a| a >= small.threshold));
    }

    #[test]
    fn metric_ranges_and_oracles(rows in score_rows(1..=6, 20), best in 0usize..6) {
        let sm = matrix(rows);
        let best = best % sm.n_models();
        let lm = harden(&sm, ThresholdPolicy::Fixed(0.5), None).unwrap();
        let d = discrepancy(&lm);
        if sm.n_models() > 1 {
            prop_assert_eq!(d, discrepancy_pairs(&lm.labels));
        } else {
            prop_assert_eq!(d, 0.0);
        }
        for i in 0..sm.n_instances() {
            let o = obscurity(&lm, best, i);
            prop_assert_eq!(o, obscurity_direct(&lm.labels, best, i));
            prop_assert!((0.0..=1.0).contains(&o));
            prop_assert_eq!(ambiguity(&lm, i) == 1, o > 0.0);
            let c = confidence(&sm, i);
            prop_assert!((0.5..=1.0).contains(&c));
        }
    }

    #[test]
    fn isotonic_is_optimal_and_monotone(
        ks in prop::collection::vec(0u32..6, 1..=8),
        ys in prop::collection::vec(0u8..=1, 8),
    ) {
        let s: Vec<f64> = ks.iter().map(|&k| f64::from(k) / 5.0).collect();
        let y = &ys[..s.len()];
        let c = fit_isotonic(&s, y).unwrap();
        let fitted = c.apply(&s);
        let sse: f64 = fitted.iter().zip(y).map(|(f, &v)| (f - f64::from(v)).powi(2)).sum();
        prop_assert!((sse - isotonic_sse_bruteforce(&s, y)).abs() <= 1e-9);
        prop_assert!((c.diagnostics.objective - sse).abs() <= 1e-9);
        for i in 0..s.len() {
            prop_assert!((0.0..=1.0).contains(&fitted[i]));
            for j in 0..s.len() {
                if s[i] < s[j] {
                    prop_assert!(fitted[i] <= fitted[j]);
                }
            }
        }
    }

    #[test]
    fn platt_returns_stationary_point(seed in 0u64..10_000, n in 4usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scores(&mut rng, n);
        let y = bernoulli_labels(&mut rng, &s);
        let c = fit_platt(&s, &y).unwrap();
        let CalibratorParams::Platt { a, b } = c.params else { unreachable!() };
        let npos = y.iter().filter(|&&v| v == 1).count() as f64;
        let nneg = n as f64 - npos;
        let t: Vec<f64> = y.iter().map(|&v| if v == 1 { (npos + 1.0) / (npos + 2.0) } else { 1.0 / (nneg + 2.0) }).collect();
        let nll = |a: f64, b: f64| -> f64 {
            s.iter().zip(&t).map(|(&p, &ti)| {
                let g = 1.0 / (1.0 + (a * p + b).exp());
                -(ti * g.ln() + (1.0 - ti) * (1.0 - g).ln())
            }).sum()
        };
        let ga = central_diff(|x| nll(x, b), a, 1e-5);
        let gb = central_diff(|x| nll(a, x), b, 1e-5);
        prop_assert!(ga.hypot(gb) <= 1e-6, "gradient ({ga}, {gb})");
    }

    #[test]
    fn temperature_is_stationary_or_flagged(seed in 0u64..10_000, n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scores(&mut rng, n);
        let y: Vec<u8> = s.iter().map(|&p| u8::from(rng.random_bool(p))).collect();
        let c = fit_temperature(&s, &y).unwrap();
        let CalibratorParams::Temperature { t } = c.params else { unreachable!() };
        prop_assert!((T_MIN..=T_MAX).contains(&t));
        let nll = |temp: f64| -> f64 {
            s.iter().zip(&y).map(|(&p, &yi)| {
                let p = p.clamp(1e-6, 1.0 - 1e-6);
                let q = 1.0 / (1.0 + (-(p / (1.0 - p)).ln() / temp).exp());
                if yi == 1 { -q.ln() } else { -(1.0 - q).ln() }
            }).sum()
        };
        if c.diagnostics.at_boundary {
            prop_assert!(t == T_MIN || t == T_MAX);
            let inside = if t == T_MIN { t + 1e-3 } else { t - 1e-3 };
            prop_assert!(nll(t) <= nll(inside) + 1e-9);
        } else {
            let g = central_diff(nll, t, 1e-5);
            prop_assert!(g.abs() <= 1e-5, "dNLL/dT = {g} at T = {t}");
        }
    }

    #[test]
    fn temperature_keeps_fixed_half_labels(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| random_scores(&mut rng, 30)).collect();
        let sm = matrix(rows);
        let before = harden(&sm, ThresholdPolicy::Fixed(0.5), None).unwrap();
        for row in &sm.scores {
            let y = bernoulli_labels(&mut rng, row);
            let c = fit_temperature(row, &y).unwrap();
            let after: Vec<u8> = c.apply(row).iter().map(|&q| u8::from(q >= 0.5)).collect();
            let direct: Vec<u8> = row.iter().map(|&p| u8::from(p >= 0.5)).collect();
            prop_assert_eq!(after, direct);
        }
        prop_assert_eq!(before.labels.len(), 4);
    }

    #[test]
    fn rank_sum_is_antisymmetric(
        x in prop::collection::vec(0u32..30, 1..15),
        y in prop::collection::vec(0u32..30, 1..15),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let a = wilcoxon_rank_sum(&x, &y, Alternative::TwoSided).unwrap();
        let b = wilcoxon_rank_sum(&y, &x, Alternative::TwoSided).unwrap();
        prop_assert!((a.z.unwrap() + b.z.unwrap()).abs() < 1e-12);
        prop_assert!((a.p_unadjusted - b.p_unadjusted).abs() < 1e-12);
    }

    #[test]
    fn exact_rank_sum_matches_enumeration(vals in prop::collection::hash_set(0u32..1000, 2..=10), split in 1usize..9) {
        let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
        let k = 1 + split % (vals.len() - 1);
        let (x, y) = vals.split_at(k);
        let r = wilcoxon_rank_sum(x, y, Alternative::TwoSided).unwrap();
        prop_assert!(r.method.starts_with("exact"));
        prop_assert!((r.p_unadjusted - rank_sum_p_enumerated(x, y)).abs() < 1e-12);
    }

    #[test]
    fn two_group_dunn_equals_rank_sum(
        x in prop::collection::vec(0u32..12, 1..25),
        y in prop::collection::vec(0u32..12, 1..25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        prop_assume!(x.iter().chain(&y).any(|&v| v != x[0]));
        let opts = RankSumOptions { allow_exact: false, continuity_correction: false };
        let w = wilcoxon_rank_sum_with(&x, &y, Alternative::TwoSided, &opts).unwrap();
        let d = &dunn_test(&[x.clone(), y.clone()], &[(0, 1)]).unwrap()[0];
        prop_assert!((d.p_unadjusted - w.p_unadjusted).abs() <= 1e-9);
        prop_assert!((d.statistic - w.z.unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn chi_squared_ignores_transposition(a in 1u64..200, b in 1u64..200, c in 1u64..200, d in 1u64..200) {
        let r1 = chi_squared_independence([[a, b], [c, d]]).unwrap();
        let r2 = chi_squared_independence([[a, c], [b, d]]).unwrap();
        prop_assert!((r1.statistic - r2.statistic).abs() <= 1e-9 * r1.statistic.max(1.0));
        prop_assert!((r1.p_unadjusted - r2.p_unadjusted).abs() <= 1e-12);
    }

    #[test]
    fn bonferroni_monotone_and_capped(mut p in prop::collection::vec(0.0f64..=1.0, 1..10), extra in 0usize..5) {
        p.sort_by(f64::total_cmp);
        let m = p.len() + extra;
        let adj = bonferroni(&p, m).unwrap();
        prop_assert!(adj.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(adj.iter().zip(&p).all(|(a, q)| a >= q && *a <= 1.0));
        let again = bonferroni(&adj, m).unwrap();
        prop_assert!(again.iter().zip(&adj).all(|(x, y)| *y < 1.0 || *x == 1.0));
    }
}

/// Every tie-free rank configuration with at most 12 values and at least 3
/// per sample: the normal approximation stays within 0.05 of the exact p.
/// With one or two values in a sample the gap reaches 0.13.
#[test]
fn normal_approximation_tracks_exact_p() {
    let approx_opts = RankSumOptions { allow_exact: false, continuity_correction: true };
    for n in 6..=12usize {
        for nx in 3..=n - 3 {
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != nx {
                    continue;
                }
                let (x, y): (Vec<f64>, Vec<f64>) = {
                    let (mut x, mut y) = (Vec::new(), Vec::new());
                    for r in 0..n {
                        if mask & (1 << r) != 0 { x.push(r as f64) } else { y.push(r as f64) }
                    }
                    (x, y)
                };
                let exact = wilcoxon_rank_sum(&x, &y, Alternative::TwoSided).unwrap().p_unadjusted;
                let approx = wilcoxon_rank_sum_with(&x, &y, Alternative::TwoSided, &approx_opts).unwrap().p_unadjusted;
                assert!((exact - approx).abs() <= 0.05, "n={n} x={x:?}: exact {exact} approx {approx}");
            }
        }
    }
}

#[test]
fn isotonic_never_reverses_a_strict_order_on_large_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = random_scores(&mut rng, 10_000);
    let y = bernoulli_labels(&mut rng, &s);
    let c = fit_isotonic(&s, &y).unwrap();
    let mut sorted = s.clone();
    sorted.sort_by(f64::total_cmp);
    let f = c.apply(&sorted);
    assert!(f.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn isotonic_can_raise_auc_by_tying_discordant_pairs() {
    // pooling turns a discordant pair into a tie
    let s = [0.1, 0.2, 0.3];
    let y = [0, 1, 0];
    let c = fit_isotonic(&s, &y).unwrap();
    assert_eq!(auc(&s, &y).unwrap(), 0.5);
    assert_eq!(auc(&c.apply(&s), &y).unwrap(), 0.75);
}

#[test]
fn label_matrix_from_labels_matches_oracles() {
    let lm = LabelMatrix::from_labels(vec![vec![1, 0, 1], vec![1, 1, 1], vec![0, 0, 1]]);
    assert_eq!(discrepancy(&lm), discrepancy_pairs(&lm.labels));
    assert_eq!(obscurity(&lm, 1, 1), 1.0);
    assert_eq!(obscurity(&lm, 0, 2), 0.0);
}
