//! Load the bundled credit table and print its class balance.
//!
//! cargo run --example load_german_credit

use rashomon_calib::data::{imbalance_ratio, label_counts, load_table};

const GERMAN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/german_credit.csv");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = load_table(GERMAN, "class", "bad")?;
    println!("{}: {} rows, {} encoded features", data.name, data.n_rows(), data.n_features());
    println!("dropped rows with missing cells: {}", data.dropped_rows);
    for (label, count) in label_counts(&data.labels) {
        println!("label {label}: {count}");
    }
    println!("imbalance ratio {:.3}, minority label {}", imbalance_ratio(&data)?, data.minority_label());
    println!("first features: {:?}", &data.feature_names[..8]);
    Ok(())
}
