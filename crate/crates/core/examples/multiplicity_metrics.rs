//! Ambiguity, discrepancy, obscurity and confidence on a hand-made score
//! matrix, then split by class group.

use rashomon_calib::data::SplitTag;
use rashomon_calib::multiplicity::{
    discrepancy, harden, instance_metrics, summarize, ClassGroup, ThresholdPolicy,
};
use rashomon_calib::zoo::ScoreMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = ScoreMatrix::new(
        vec!["best".into(), "a".into(), "b".into()],
        (0..6).map(|i| format!("x{i}")).collect(),
        vec![
            vec![0.9, 0.8, 0.55, 0.45, 0.2, 0.1],
            vec![0.85, 0.7, 0.48, 0.52, 0.3, 0.05],
            vec![0.95, 0.6, 0.51, 0.40, 0.6, 0.15],
        ],
        SplitTag::Test,
    )?;
    let labels = [1, 1, 1, 0, 0, 0];
    let minority = 1;
    let groups: Vec<ClassGroup> = labels.iter().map(|&y| ClassGroup::of(y, minority)).collect();

    let hard = harden(&scores, ThresholdPolicy::Fixed(0.5), None)?;
    println!("discrepancy {:.3}", discrepancy(&hard));
    let metrics = instance_metrics(&scores, &hard, 0, &groups)?;
    for m in &metrics {
        println!(
            "{} {:<8} ambiguity {} obscurity {:.2} confidence {:.3}",
            m.instance_id, m.class_group, m.ambiguity, m.obscurity, m.confidence
        );
    }
    for g in summarize(&metrics)? {
        println!("{:<8} n={} mean obscurity {:.3} ± {:.3}", g.class_group, g.n, g.mean_obscurity, g.sem_obscurity);
    }
    Ok(())
}
