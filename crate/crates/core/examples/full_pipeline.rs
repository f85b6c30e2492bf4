//! Run the whole experiment on the credit table and write the report files.
//!
//! cargo run --release --example full_pipeline -- [seed] [out_dir]

use rashomon_calib::pipeline::{run_experiment, ExperimentConfig};
use rashomon_calib::report::emit;

const GERMAN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/german_credit.csv");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().map_or(Ok(42), |s| s.parse())?;
    let out = args.get(1).cloned().unwrap_or_else(|| format!("target/german_credit_seed{seed}"));

    let mut cfg = ExperimentConfig::table(GERMAN, "class", "bad");
    cfg.seed = seed;
    let report = run_experiment(&cfg)?;

    println!("Rashomon set: {} of {} models, best {}", report.rashomon.len(), report.zoo.len(), report.rashomon.best_id);
    for v in &report.variants {
        let groups: Vec<String> = v
            .groups
            .iter()
            .map(|g| format!("{} obscurity {:.3} confidence {:.3}", g.class_group, g.mean_obscurity, g.mean_confidence))
            .collect();
        println!("{:<12} discrepancy {:.3}; {}", v.variant.to_string(), v.discrepancy, groups.join("; "));
    }
    for row in &report.tests.comparisons {
        println!("{:<8} {:<20} {:<10} Z {:>7.3} p_adj {:.4}", row.class_group.to_string(), row.comparison(), row.metric.to_string(), row.z, row.p_adj);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for path in emit(&report, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
