//! Predictive multiplicity across Rashomon sets of binary classifiers, and
//! how post-hoc calibration changes it.
//!
//! A run trains a zoo of classifiers, keeps the near-optimal ones by AUC,
//! and measures how much their hard predictions disagree on held-out data.
//! The same measurements are repeated after Platt, isotonic and temperature
//! calibration, and the variants are compared with rank-based tests.
//!
//! ```no_run
//! use rashomon_calib::data::SynthSpec;
//! use rashomon_calib::pipeline::{run_experiment, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::synthetic(SynthSpec::new(1000, 3.0, 0.4, 7));
//! let report = run_experiment(&cfg).unwrap();
//! println!("{} Rashomon members", report.rashomon.len());
//! ```

pub mod calibrate;
pub mod data;
pub mod multiplicity;
pub mod pipeline;
pub mod rashomon;
pub mod report;
pub mod stats;
pub mod zoo;

pub use calibrate::{Calibrator, Variant};
pub use data::{Dataset, SplitTag, SynthSpec};
pub use multiplicity::{ClassGroup, ThresholdPolicy};
pub use pipeline::{run_experiment, ExperimentConfig, PipelineError};
pub use rashomon::RashomonSet;
pub use report::MultiplicityReport;
pub use zoo::{ModelSpec, ScoreMatrix};
