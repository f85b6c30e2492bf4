//! Train the default zoo of twenty models and report each one's test AUC.
//!
//! cargo run --release --example train_zoo

use rashomon_calib::data::{load_table, stratified_split, SplitTag};
use rashomon_calib::zoo::{auc, default_zoo, score, train_all};

const GERMAN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/german_credit.csv");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = load_table(GERMAN, "class", "bad")?;
    let split = stratified_split(&data, [0.6, 0.2, 0.2], 42)?;
    let specs = default_zoo(20, 42);
    let models = train_all(&specs, &data.view(&split.train))?;

    let test = data.view(&split.test);
    let scores = score(&models, &test, SplitTag::Test)?;
    let labels = test.labels();
    for (model, row) in models.iter().zip(&scores.scores) {
        println!(
            "{:<22} iters {:>5} loss {:.4} test AUC {:.4}",
            model.id(),
            model.summary.iterations,
            model.summary.final_loss,
            auc(row, &labels)?
        );
    }
    Ok(())
}
