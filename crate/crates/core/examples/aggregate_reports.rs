//! Run several synthetic datasets, then average their per-group means the
//! way the `aggregate` command does.
//!
//! cargo run --release --example aggregate_reports

use rashomon_calib::data::SynthSpec;
use rashomon_calib::pipeline::{run_experiment, ExperimentConfig};
use rashomon_calib::report::aggregate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut reports = Vec::new();
    for (k, imbalance) in [1.5, 3.0, 6.0].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::synthetic(SynthSpec::new(1200, imbalance, 0.45, k as u64));
        cfg.n_models = 10;
        reports.push(run_experiment(&cfg)?);
    }
    let summary = aggregate(&reports)?;
    for g in &summary.rows {
        println!(
            "{:<12} {:<8} obscurity {:.4} ± {:.4}  confidence {:.4} ± {:.4}",
            g.variant.to_string(),
            g.class_group.to_string(),
            g.grand_mean_obscurity,
            g.sem_obscurity,
            g.grand_mean_confidence,
            g.sem_confidence
        );
    }
    Ok(())
}
