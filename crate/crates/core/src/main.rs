use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rashomon_calib::calibrate::Variant;
use rashomon_calib::data::{DataError, SplitTag, SynthSpec};
use rashomon_calib::multiplicity::ThresholdPolicy;
use rashomon_calib::pipeline::{
    read_label_table, run_experiment, run_on_scores, DataSource, ExperimentConfig, PipelineError, ScoreRunConfig,
};
use rashomon_calib::report::{aggregate, emit, emit_aggregate, read_report};
use rashomon_calib::zoo::read_score_table;

#[derive(Parser)]
#[command(name = "rashomon-calib", version, about = "Measure predictive multiplicity before and after calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model zoo on a dataset and write a multiplicity report.
    Run(RunArgs),
    /// Measure multiplicity from an existing score table.
    Metrics(MetricsArgs),
    /// Combine report.json files from several runs.
    Aggregate(AggregateArgs),
}

#[derive(Args)]
struct Shared {
    /// Relative AUC margin for Rashomon membership.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Comma-separated calibration methods.
    #[arg(long, value_delimiter = ',', default_value = "platt,isotonic,temperature")]
    methods: Vec<Variant>,
    /// `fixed:<t>` or `maxf1`.
    #[arg(long, default_value = "fixed:0.5")]
    threshold: ThresholdPolicy,
    /// Bonferroni family size (default: one per calibrated variant and class group).
    #[arg(long)]
    bonferroni_m: Option<usize>,
    /// Split used to select the Rashomon set: `test` or `calibration`.
    #[arg(long, default_value = "test")]
    selection_split: SplitTag,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Delimited table with a header row.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    data: Option<PathBuf>,
    /// Synthetic mixture `n,imbalance,overlap`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    synth: Option<Vec<f64>>,
    /// Target column of the table.
    #[arg(long, requires = "data")]
    target: Option<String>,
    /// Target value mapped to label 1.
    #[arg(long, requires = "data")]
    positive: Option<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Train, calibration and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
    split: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    n_models: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct MetricsArgs {
    /// `model_id,instance_id,split,score` table.
    #[arg(long)]
    scores: PathBuf,
    /// `instance_id,label` table.
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<Vec<PathBuf>, PipelineError> {
    let source = match (args.data, args.synth) {
        (Some(path), _) => {
            let (Some(target), Some(positive)) = (args.target, args.positive) else {
                return Err(PipelineError::Config("--data needs both --target and --positive".into()));
            };
            DataSource::Table { path, target, positive, delimiter: args.delimiter }
        }
        (None, Some(s)) => {
            let n = s[0];
            if !(n >= 0.0 && n.fract() == 0.0) {
                return Err(PipelineError::Config(format!("synthetic size {n} is not a whole number")));
            }
            DataSource::Synthetic(SynthSpec::new(n as usize, s[1], s[2], args.seed))
        }
        (None, None) => return Err(PipelineError::Config("either --data or --synth is required".into())),
    };
    let mut cfg = ExperimentConfig::new(source);
    cfg.fractions = [args.split[0], args.split[1], args.split[2]];
    cfg.n_models = args.n_models;
    cfg.seed = args.seed;
    apply_shared(&mut cfg, &args.shared);
    let report = run_experiment(&cfg)?;
    emit(&report, &args.shared.out)
}

fn apply_shared(cfg: &mut ExperimentConfig, s: &Shared) {
    cfg.epsilon = s.epsilon;
    cfg.methods = s.methods.clone();
    cfg.threshold = s.threshold;
    cfg.bonferroni_m = s.bonferroni_m;
    cfg.selection_split = s.selection_split;
}

fn open(path: &PathBuf) -> Result<File, PipelineError> {
    File::open(path).map_err(|e| PipelineError::Data(DataError::Io { path: path.display().to_string(), source: e }))
}

fn metrics(args: MetricsArgs) -> Result<Vec<PathBuf>, PipelineError> {
    let matrices =
        read_score_table(open(&args.scores)?).map_err(|e| PipelineError::Data(DataError::Shape(e.to_string())))?;
    let labels = read_label_table(open(&args.labels)?)?;
    let s = &args.shared;
    let cfg = ScoreRunConfig {
        epsilon: s.epsilon,
        methods: s.methods.clone(),
        threshold: s.threshold,
        bonferroni_m: s.bonferroni_m,
        selection_split: s.selection_split,
    };
    let name = args.scores.file_stem().map_or_else(|| "scores".into(), |n| n.to_string_lossy().into_owned());
    let report = run_on_scores(&name, &matrices, &labels, &cfg)?;
    emit(&report, &s.out)
}

fn aggregate_cmd(args: AggregateArgs) -> Result<Vec<PathBuf>, PipelineError> {
    let reports = args.reports.iter().map(read_report).collect::<Result<Vec<_>, _>>()?;
    emit_aggregate(&aggregate(&reports)?, &args.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Metrics(a) => metrics(a),
        Command::Aggregate(a) => aggregate_cmd(a),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
