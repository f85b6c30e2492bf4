//! Draw a synthetic imbalanced mixture and split it into train,
//! calibration and test parts with class proportions kept.
//!
//! cargo run --example synthesize_and_split -- 2000 4.0 0.3

use rashomon_calib::data::{label_counts, stratified_split, synthesize, SplitTag};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(Ok(1000), |s| s.parse())?;
    let imbalance = args.get(1).map_or(Ok(3.0), |s| s.parse())?;
    let overlap = args.get(2).map_or(Ok(0.4), |s| s.parse())?;

    let data = synthesize(n, imbalance, overlap, 7)?;
    let split = stratified_split(&data, [0.6, 0.2, 0.2], 7)?;
    println!("{} with {:?}", data.name, label_counts(&data.labels));
    for tag in [SplitTag::Train, SplitTag::Calibration, SplitTag::Test] {
        let labels = data.view(split.rows(tag)).labels();
        println!("{tag:>12}: {:>5} rows {:?}", labels.len(), label_counts(&labels));
    }
    Ok(())
}
