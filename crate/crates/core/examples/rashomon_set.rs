//! Show how the Rashomon set grows as the AUC margin widens.
//!
//! cargo run --release --example rashomon_set

use rashomon_calib::data::{synthesize, stratified_split, SplitTag};
use rashomon_calib::rashomon;
use rashomon_calib::zoo::{default_zoo, score, train_all};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthesize(1500, 3.0, 0.5, 11)?;
    let split = stratified_split(&data, [0.6, 0.2, 0.2], 11)?;
    let models = train_all(&default_zoo(12, 11), &data.view(&split.train))?;
    let test = data.view(&split.test);
    let scores = score(&models, &test, SplitTag::Test)?;

    for eps in [0.005, 0.01, 0.02, 0.05, 0.1] {
        let set = rashomon::build(&scores, &test.labels(), eps)?;
        println!(
            "eps {eps:<5} cut-off {:.4}: {:>2} members, best {} ({:.4})",
            set.threshold,
            set.len(),
            set.best_id,
            set.best_auc
        );
    }
    Ok(())
}
