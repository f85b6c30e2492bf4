//! Fit the three calibrators to an over-confident score sample and compare
//! their outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rashomon_calib::calibrate::{fit, CalibratorParams, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // true probability q, reported score pushed towards 0 or 1
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..400 {
        let q: f64 = rng.random();
        let logit = (q / (1.0 - q)).ln() * 2.5;
        scores.push(1.0 / (1.0 + (-logit).exp()));
        labels.push(u8::from(rng.random::<f64>() < q));
    }

    let grid = [0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.98];
    println!("{:<12} {}", "input", grid.map(|p| format!("{p:>6.2}")).join(""));
    for variant in Variant::ALL {
        let c = fit(variant, &scores, &labels)?;
        let out = grid.map(|p| format!("{:>6.2}", c.transform(p))).join("");
        println!("{:<12} {out}", variant.name());
        let params = match &c.params {
            CalibratorParams::Isotonic { breakpoints } => format!("{} breakpoints", breakpoints.len()),
            other => serde_json::to_string(other)?,
        };
        println!("{:<12} {params}", "");
    }
    Ok(())
}
