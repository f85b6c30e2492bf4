//! Temperature scaling cannot move labels at a fixed 0.5 cut-off, but it
//! can once the cut-off is tuned per model on the calibration split.
//!
//! cargo run --release --example threshold_policies

use rashomon_calib::calibrate::Variant;
use rashomon_calib::data::SynthSpec;
use rashomon_calib::multiplicity::ThresholdPolicy;
use rashomon_calib::pipeline::{run_experiment, ExperimentConfig};
use rashomon_calib::report::EvalVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for policy in [ThresholdPolicy::Fixed(0.5), ThresholdPolicy::MaxF1] {
        let mut cfg = ExperimentConfig::synthetic(SynthSpec::new(1500, 3.0, 0.45, 5));
        cfg.n_models = 12;
        cfg.methods = vec![Variant::Temperature];
        cfg.threshold = policy;
        let report = run_experiment(&cfg)?;

        let obscurity = |v| -> Vec<f64> {
            report.variant(v).map(|r| r.instances.iter().map(|m| m.obscurity).collect()).unwrap_or_default()
        };
        let (raw, temp) = (obscurity(EvalVariant::Raw), obscurity(EvalVariant::Temperature));
        let changed = raw.iter().zip(&temp).filter(|(a, b)| a != b).count();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{policy:<10} raw {:.4} temperature {:.4}, {changed} of {} instances changed",
            mean(&raw),
            mean(&temp),
            raw.len()
        );
    }
    Ok(())
}
