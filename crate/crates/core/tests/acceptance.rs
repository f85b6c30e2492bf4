//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rashomon_calib::calibrate::{fit_isotonic, fit_platt, fit_temperature, CalibratorParams};
use rashomon_calib::data::{imbalance_ratio, load_table, SplitTag};
use rashomon_calib::multiplicity::{ambiguity, discrepancy, harden, obscurity, LabelMatrix, ThresholdPolicy};
use rashomon_calib::pipeline::{run_experiment, ExperimentConfig};
use rashomon_calib::report::{emit, EvalVariant, MultiplicityReport};
use rashomon_calib::stats::{bonferroni, chi_squared_independence, dunn_test, wilcoxon_rank_sum, Alternative};
use rashomon_calib::zoo::{auc, ScoreMatrix};

const GERMAN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/german_credit.csv");
const SEEDS: [u64; 3] = [1, 2, 3];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn german_cfg(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::table(GERMAN, "class", "bad");
    cfg.seed = seed;
    cfg
}

fn dataset_fidelity() -> Outcome {
    let d = load_table(GERMAN, "class", "bad").map_err(|e| e.to_string())?;
    let ratio = imbalance_ratio(&d).map_err(|e| e.to_string())?;
    check(d.n_rows() == 1000, format!("{} rows", d.n_rows()))?;
    check(format!("{ratio:.3}") == "2.333", format!("imbalance ratio {ratio}"))?;
    Ok(format!("1000 rows, imbalance ratio {ratio:.3}"))
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..200 {
        let models = rng.random_range(1..=6);
        let n = rng.random_range(1..=20);
        let labels: Vec<Vec<u8>> = (0..models).map(|_| (0..n).map(|_| rng.random_range(0..=1)).collect()).collect();
        let best = rng.random_range(0..models);
        let lm = LabelMatrix::from_labels(labels.clone());
        let expected = if models > 1 { discrepancy_pairs(&labels) } else { 0.0 };
        check(discrepancy(&lm) == expected, format!("case {case}: discrepancy"))?;
        for i in 0..n {
            let o = obscurity(&lm, best, i);
            check(o == obscurity_direct(&labels, best, i), format!("case {case}: obscurity at {i}"))?;
            check((ambiguity(&lm, i) == 1) == (o > 0.0), format!("case {case}: ambiguity at {i}"))?;
        }
    }
    Ok("200 label matrices agree with brute force".into())
}

fn pav_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        // coarse grid so tied scores occur
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u32)) / 5.0).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let c = fit_isotonic(&s, &y).map_err(|e| e.to_string())?;
        let sse: f64 = c.apply(&s).iter().zip(&y).map(|(f, &v)| (f - f64::from(v)).powi(2)).sum();
        let gap = (sse - isotonic_sse_bruteforce(&s, &y)).abs();
        worst = worst.max(gap);
        check(gap <= 1e-6, format!("case {case}: objective gap {gap}"))?;
    }
    for n in [10, 100, 1000, 10_000] {
        let s = random_scores(&mut rng, n);
        let y = bernoulli_labels(&mut rng, &s);
        let c = fit_isotonic(&s, &y).map_err(|e| e.to_string())?;
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let f = c.apply(&sorted);
        check(f.windows(2).all(|w| w[0] <= w[1]), format!("n = {n}: fit decreases"))?;
        check(f.iter().all(|v| (0.0..=1.0).contains(v)), format!("n = {n}: fit outside [0, 1]"))?;
    }
    Ok(format!("max objective gap {worst:.1e}; monotone up to n = 10000"))
}

fn platt_correctness() -> Outcome {
    let c = fit_platt(&[0.2, 0.8], &[0, 1]).map_err(|e| e.to_string())?;
    let g = c.transform(0.2);
    check((g - 1.0 / 3.0).abs() <= 1e-6, format!("g(0.2) = {g}"))?;
    check((c.transform(0.8) - 2.0 / 3.0).abs() <= 1e-6, "g(0.8) misses 2/3")?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(2..=80);
        let s = random_scores(&mut rng, n);
        let y = bernoulli_labels(&mut rng, &s);
        let c = fit_platt(&s, &y).map_err(|e| e.to_string())?;
        let CalibratorParams::Platt { a, b } = c.params else { unreachable!() };
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let neg = n as f64 - pos;
        let t: Vec<f64> = y.iter().map(|&v| if v == 1 { (pos + 1.0) / (pos + 2.0) } else { 1.0 / (neg + 2.0) }).collect();
        let nll = |a: f64, b: f64| -> f64 {
            s.iter()
                .zip(&t)
                .map(|(&p, &ti)| {
                    let g = 1.0 / (1.0 + (a * p + b).exp());
                    -(ti * g.ln() + (1.0 - ti) * (1.0 - g).ln())
                })
                .sum()
        };
        let grad = central_diff(|x| nll(x, b), a, 1e-5).hypot(central_diff(|x| nll(a, x), b, 1e-5));
        worst = worst.max(grad);
        check(grad <= 1e-6, format!("case {case}: gradient norm {grad}"))?;
    }
    Ok(format!("g(0.2) = {g:.9}; max finite-difference gradient {worst:.1e}"))
}

fn temperature_correctness() -> Outcome {
    let p_hi = 1.0 / (1.0 + (-2.0f64).exp());
    let p_lo = 1.0 - p_hi;
    let c = fit_temperature(&[p_hi, p_hi, p_hi, p_lo], &[1, 1, 1, 1]).map_err(|e| e.to_string())?;
    let CalibratorParams::Temperature { t } = c.params else { unreachable!() };
    let expected = 2.0 / 3f64.ln();
    check((t - expected).abs() <= 1e-4, format!("T = {t}, expected {expected}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut interior = 0;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(2..=60);
        let s = random_scores(&mut rng, n);
        let y = bernoulli_labels(&mut rng, &s);
        let c = fit_temperature(&s, &y).map_err(|e| e.to_string())?;
        if c.diagnostics.at_boundary {
            continue;
        }
        interior += 1;
        let CalibratorParams::Temperature { t } = c.params else { unreachable!() };
        let nll = |temp: f64| -> f64 {
            s.iter()
                .zip(&y)
                .map(|(&p, &yi)| {
                    let p = p.clamp(1e-6, 1.0 - 1e-6);
                    let q = 1.0 / (1.0 + (-(p / (1.0 - p)).ln() / temp).exp());
                    if yi == 1 { -q.ln() } else { -(1.0 - q).ln() }
                })
                .sum()
        };
        let d = central_diff(nll, t, 1e-5).abs();
        worst = worst.max(d);
        check(d <= 1e-5, format!("case {case}: dNLL/dT = {d} at T = {t}"))?;
    }

    for case in 0..100 {
        let models = rng.random_range(1..=6);
        let n = rng.random_range(5..=40);
        let rows: Vec<Vec<f64>> = (0..models).map(|_| random_scores(&mut rng, n)).collect();
        let before = harden(&matrix(rows.clone()), ThresholdPolicy::Fixed(0.5), None).map_err(|e| e.to_string())?;
        let mut calibrated = Vec::new();
        for row in &rows {
            let y = bernoulli_labels(&mut rng, row);
            calibrated.push(fit_temperature(row, &y).map_err(|e| e.to_string())?.apply(row));
        }
        let after = harden(&matrix(calibrated), ThresholdPolicy::Fixed(0.5), None).map_err(|e| e.to_string())?;
        check(before.labels == after.labels, format!("matrix {case}: labels changed"))?;
    }
    Ok(format!("T = {t:.6}; {interior} interior optima, max |dNLL/dT| {worst:.1e}; labels unchanged on 100 matrices"))
}

fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
    let ids = (0..rows.len()).map(|k| format!("m{k}")).collect();
    let inst = (0..rows[0].len()).map(|i| i.to_string()).collect();
    ScoreMatrix::new(ids, inst, rows, SplitTag::Test).unwrap()
}

fn rank_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut fits = 0;
    let mut worst = 0.0f64;
    for case in 0..50 {
        let models = rng.random_range(1..=6);
        for m in 0..models {
            let cal = random_scores(&mut rng, 60);
            let cal_y = bernoulli_labels(&mut rng, &cal);
            let eval = random_scores(&mut rng, 60);
            let eval_y = bernoulli_labels(&mut rng, &eval);
            let raw = auc(&eval, &eval_y).map_err(|e| e.to_string())?;
            let platt = fit_platt(&cal, &cal_y).map_err(|e| e.to_string())?;
            let temp = fit_temperature(&cal, &cal_y).map_err(|e| e.to_string())?;
            for c in [platt, temp] {
                let after = auc(&c.apply(&eval), &eval_y).map_err(|e| e.to_string())?;
                let gap = (after - raw).abs();
                worst = worst.max(gap);
                check(gap <= 1e-12, format!("matrix {case} model {m} {}: AUC {raw} -> {after} ({:?})", c.variant(), c.params))?;
                fits += 1;
            }
        }
    }
    Ok(format!("{fits} Platt/temperature fits, max AUC change {worst:.1e}"))
}

fn statistical_tests() -> Outcome {
    let tol = |a: f64, b: f64, t: f64, what: &str| check((a - b).abs() <= t, format!("{what}: {a} vs {b}"));
    let w = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).map_err(|e| e.to_string())?;
    tol(w.p_unadjusted, 0.1, 1e-12, "exact p")?;

    let mut configs = 0;
    for n in 2..=10usize {
        for mask in 1u32..(1 << n) - 1 {
            let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|r| r as f64).partition(|&r| mask & (1 << r as u32) != 0);
            let p = wilcoxon_rank_sum(&x, &y, Alternative::TwoSided).map_err(|e| e.to_string())?.p_unadjusted;
            tol(p, rank_sum_p_enumerated(&x, &y), 1e-12, &format!("exact p for {x:?} vs {y:?}"))?;
            configs += 1;
        }
    }

    let chi = chi_squared_independence([[20, 10], [10, 20]]).map_err(|e| e.to_string())?;
    tol(chi.statistic, 6.667, 1e-3, "chi-squared")?;
    let dunn = dunn_test(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], &[(0, 1)]).map_err(|e| e.to_string())?;
    tol(dunn[0].statistic, -1.964, 1e-3, "Dunn Z")?;
    let adj = bonferroni(&[0.01], 3).map_err(|e| e.to_string())?;
    tol(adj[0], 0.03, 1e-15, "Bonferroni")?;
    Ok(format!(
        "exact p 0.1; {configs} rank configurations match enumeration; chi2 {:.3}; Dunn Z {:.3}",
        chi.statistic, dunn[0].statistic
    ))
}

fn pooled_obscurity(r: &MultiplicityReport, v: EvalVariant) -> f64 {
    let inst = &r.variant(v).expect("variant present").instances;
    inst.iter().map(|m| m.obscurity).sum::<f64>() / inst.len() as f64
}

fn group_obscurity(r: &MultiplicityReport, group: &str) -> f64 {
    let raw = r.variant(EvalVariant::Raw).expect("raw variant");
    raw.groups.iter().find(|g| g.class_group.to_string() == group).map_or(f64::NAN, |g| g.mean_obscurity)
}

fn minority_burden(runs: &[(u64, MultiplicityReport, Duration)]) -> Outcome {
    let mut significant = 0;
    let mut lines = Vec::new();
    for (seed, r, elapsed) in runs {
        check(elapsed.as_secs_f64() < 120.0, format!("seed {seed} took {elapsed:?}"))?;
        let (min, maj) = (group_obscurity(r, "minority"), group_obscurity(r, "majority"));
        let p = r.tests.obscurity_by_group.as_ref().ok_or("rank-sum test missing")?.p_unadjusted;
        check(min > maj, format!("seed {seed}: minority {min:.4} <= majority {maj:.4}"))?;
        significant += usize::from(p < 0.05);
        lines.push(format!("seed {seed}: {min:.3} vs {maj:.3}, p={p:.1e}"));
    }
    check(significant >= 2, format!("only {significant} of 3 seeds significant"))?;
    Ok(lines.join("; "))
}

fn calibration_lowers_obscurity(runs: &[(u64, MultiplicityReport, Duration)]) -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (seed, r, _) in runs {
        let raw = pooled_obscurity(r, EvalVariant::Raw);
        let platt = pooled_obscurity(r, EvalVariant::Platt);
        let iso = pooled_obscurity(r, EvalVariant::Isotonic);
        lines.push(format!("seed {seed}: raw {raw:.4} platt {platt:.4} isotonic {iso:.4}"));
        if platt >= raw {
            failures.push(format!("seed {seed} platt"));
        }
        if iso >= raw {
            failures.push(format!("seed {seed} isotonic"));
        }
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(format!("not below raw: {} ({})", failures.join(", "), lines.join("; ")))
    }
}

fn strip_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        let report = run_experiment(&german_cfg(42)).map_err(|e| e.to_string())?;
        emit(&report, d.path()).map_err(|e| e.to_string())?;
    }
    let read = |dir: &Path, name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| e.to_string());
    for name in ["report.json", "instances.csv", "group_summary.csv", "comparisons.csv"] {
        let (a, b) = (read(dirs[0].path(), name)?, read(dirs[1].path(), name)?);
        check(strip_timestamp(&a) == strip_timestamp(&b), format!("{name} differs"))?;
    }
    Ok("two seed-42 runs emit identical files apart from the timestamp".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut outcome = f();
        let secs = start.elapsed().as_secs_f64();
        if let (Ok(_), Some(l)) = (&outcome, limit) {
            if secs >= l {
                outcome = Err(format!("took {secs:.2}s, limit {l}s"));
            }
        }
        match outcome {
            Ok(detail) => println!("[PASS] {id:>2} {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name} ({secs:.2}s): {why}");
            }
        }
    };

    report(1, "dataset fidelity", Some(1.0), &mut dataset_fidelity);
    report(2, "metric oracles", Some(5.0), &mut metric_oracles);
    report(3, "isotonic correctness", Some(30.0), &mut pav_correctness);
    report(4, "Platt correctness", Some(10.0), &mut platt_correctness);
    report(5, "temperature correctness", None, &mut temperature_correctness);
    report(6, "rank preservation", None, &mut rank_preservation);
    report(7, "statistical tests", Some(10.0), &mut statistical_tests);

    let runs: Result<Vec<_>, String> = SEEDS
        .iter()
        .map(|&seed| {
            let start = Instant::now();
            let r = run_experiment(&german_cfg(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
            Ok((seed, r, start.elapsed()))
        })
        .collect();
    report(8, "minority obscurity burden", None, &mut || minority_burden(runs.as_ref().map_err(Clone::clone)?));
    report(9, "Platt and isotonic lower obscurity", None, &mut || {
        calibration_lowers_obscurity(runs.as_ref().map_err(Clone::clone)?)
    });
    report(10, "end-to-end determinism", Some(120.0), &mut determinism);

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
