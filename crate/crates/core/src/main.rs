use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frugal::clafi::ViolationRule;
use frugal::dataset::{self, holdout_views, LabelCounter, ValidationDraw};
use frugal::dimension::{estimate_dimension, write_profile_csv, DimensionOptions};
use frugal::harness::{
    budget_sweep, emit_report, generate_synthetic, render_table, run_experiment, to_json,
    write_sweep_csv, ExperimentConfig, ReportFormat, Treatment,
};
use frugal::metrics::AucMode;
use frugal::tuner::{fit_config, frugal_tune, ClaConfig, CutoffSource, Mode, SelectionMetric, TunerOptions};
use frugal::{Error, ForestParams, Result};

#[derive(Parser)]
#[command(name = "frugal", version, about = "Label-frugal CLA/FRUGAL learners and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on train, label test, write a predictions CSV.
    Predict(PredictArgs),
    /// Run the grid search on train and write the winner and trace as JSON.
    Tune(TuneArgs),
    /// Run the bins × samples protocol and write reports.
    Benchmark(BenchmarkArgs),
    /// Repeat the benchmark across label budgets.
    Sweep(SweepArgs),
    /// Correlation-sum intrinsic dimensionality profile.
    Dimension(DimensionArgs),
    /// Generate planted-structure synthetic data.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TreatmentArg {
    Cla,
    ClaMl,
    ClafiMl,
    Frugal,
}

impl From<TreatmentArg> for Treatment {
    fn from(t: TreatmentArg) -> Self {
        match t {
            TreatmentArg::Cla => Treatment::Cla,
            TreatmentArg::ClaMl => Treatment::ClaMl,
            TreatmentArg::ClafiMl => Treatment::ClafiMl,
            TreatmentArg::Frugal => Treatment::Frugal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Auc,
    Accuracy,
    F1,
    Recall,
}

impl From<MetricArg> for SelectionMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Auc => SelectionMetric::Auc,
            MetricArg::Accuracy => SelectionMetric::Accuracy,
            MetricArg::F1 => SelectionMetric::F1,
            MetricArg::Recall => SelectionMetric::Recall,
        }
    }
}

#[derive(Args, Clone)]
struct LearnerArgs {
    /// Metric used to pick the winning configuration.
    #[arg(long, value_enum, default_value = "auc")]
    metric: MetricArg,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_split: usize,
    /// Use the inverted violation rule (audit only).
    #[arg(long)]
    inverted_violations: bool,
    /// CLA mode reuses training cutoffs instead of recomputing them on the target.
    #[arg(long)]
    cla_training_cutoffs: bool,
    /// Compute AUC from hard labels instead of scores.
    #[arg(long)]
    hard_label_auc: bool,
    /// Draw the validation slice uniformly instead of stratified.
    #[arg(long)]
    uniform_validation: bool,
    #[arg(long, env = "FRUGAL_SEED", default_value_t = 0)]
    seed: u64,
}

impl LearnerArgs {
    fn tuner(&self) -> TunerOptions {
        TunerOptions {
            metric: self.metric.into(),
            forest: ForestParams {
                n_trees: self.trees,
                max_depth: self.max_depth,
                min_split: self.min_split,
                ..ForestParams::default()
            },
            violation_rule: if self.inverted_violations {
                ViolationRule::Inverted
            } else {
                ViolationRule::Proneness
            },
            cla_cutoffs: if self.cla_training_cutoffs {
                CutoffSource::Training
            } else {
                CutoffSource::Target
            },
            auc_mode: if self.hard_label_auc {
                AucMode::HardLabel
            } else {
                AucMode::Score
            },
        }
    }

    fn draw(&self) -> ValidationDraw {
        if self.uniform_validation {
            ValidationDraw::Uniform
        } else {
            ValidationDraw::Stratified
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, value_enum, default_value = "frugal")]
    treatment: TreatmentArg,
    /// Percentile for fixed-C treatments.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.025)]
    budget: f64,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value_t = 0.025)]
    budget: f64,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Dataset name for reports; defaults to the test file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_enum, default_value = "frugal")]
    treatment: TreatmentArg,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 5)]
    bins: usize,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// Fraction of the train set drawn into each sample.
    #[arg(long, default_value_t = 1.0)]
    sample_fraction: f64,
    #[command(flatten)]
    learner: LearnerArgs,
}

impl ExperimentArgs {
    fn config(&self, budget: f64) -> ExperimentConfig {
        ExperimentConfig {
            dataset: self.name.clone().unwrap_or_else(|| {
                self.test
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "data".into())
            }),
            treatment: self.treatment.into(),
            c: self.c,
            label_budget: budget,
            seed: self.learner.seed,
            bins: self.bins,
            samples: self.samples,
            sample_fraction: self.sample_fraction,
            validation: self.learner.draw(),
            tuner: self.learner.tuner(),
        }
    }

    fn load(&self) -> Result<(frugal::Dataset, frugal::Dataset)> {
        let label = Some(self.label_column.as_str());
        Ok((dataset::load_csv(&self.train, label)?, dataset::load_csv(&self.test, label)?))
    }
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 0.025)]
    budget: f64,
    /// Full per-run trace.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Median/IQR rows per metric.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Aligned text table; printed to stdout when no output is given.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.025,0.05,0.1,0.2")]
    budgets: Vec<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DimensionArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column to ignore (e.g. the label).
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, default_value_t = 20)]
    radii: usize,
    #[arg(long)]
    no_normalize: bool,
    /// Minimum pair count for a radius to enter the slope search (default: n).
    #[arg(long)]
    min_pairs: Option<u64>,
    /// Profile CSV; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    separation: f64,
    #[arg(long, default_value_t = 0.15)]
    positive_ratio: f64,
    #[arg(long, env = "FRUGAL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, short)]
    out: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn predict(args: PredictArgs) -> Result<()> {
    let label = Some(args.label_column.as_str());
    let train = dataset::load_csv(&args.train, label)?;
    let test = dataset::load_csv(&args.test, label)?.features_only();
    let opts = args.learner.tuner();
    let treatment: Treatment = args.treatment.into();
    let preds = match (treatment, args.c) {
        (Treatment::Frugal, None) => {
            let counter = LabelCounter::new();
            let views = holdout_views(&train, args.budget, args.learner.draw(), args.learner.seed, &counter)?;
            let tuned = frugal_tune(&views.tuning, &views.validation, &opts, args.learner.seed)?;
            eprintln!(
                "winner {} C={} ({}={:.4}, {} labels read)",
                tuned.winner.mode, tuned.winner.c, tuned.metric, tuned.validation_score, counter.reads()
            );
            tuned.model.predict(&test)?
        }
        (Treatment::Frugal, Some(_)) => {
            return Err(Error::Contract("frugal searches C itself; do not pass --c".into()))
        }
        (_, None) => return Err(Error::Contract("fixed-C treatments need --c".into())),
        (t, Some(c)) => {
            let mode = match t {
                Treatment::Cla => Mode::Cla,
                Treatment::ClaMl => Mode::ClaMl,
                _ => Mode::ClafiMl,
            };
            fit_config(ClaConfig { mode, c }, &train.features_only(), &opts, args.learner.seed)?
                .model
                .predict(&test)?
        }
    };
    let file = std::fs::File::create(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["row", "label", "score"])?;
    for (i, p) in preds.iter().enumerate() {
        w.write_record([i.to_string(), p.label.to_string(), p.score.to_string()])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })
}

fn tune(args: TuneArgs) -> Result<()> {
    let train = dataset::load_csv(&args.train, Some(args.label_column.as_str()))?;
    let counter = LabelCounter::new();
    let views = holdout_views(&train, args.budget, args.learner.draw(), args.learner.seed, &counter)?;
    let tuned = frugal_tune(&views.tuning, &views.validation, &args.learner.tuner(), args.learner.seed)?;
    let json = serde_json::json!({
        "label_reads": counter.reads(),
        "train_rows": train.n_rows(),
        "validation_indices": views.validation_indices,
        "tuning": tuned.summary(),
    });
    write_file(&args.out, &(serde_json::to_string_pretty(&json)? + "\n"))
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let (train, test) = args.exp.load()?;
    let result = run_experiment(&args.exp.config(args.budget), &train, &test)?;
    for f in &result.failures {
        eprintln!("run (bin {}, sample {}) failed: {}", f.bin, f.sample, f.error);
    }
    let results = [result];
    if let Some(p) = &args.json {
        emit_report(&results, ReportFormat::Json, p)?;
    }
    if let Some(p) = &args.csv {
        emit_report(&results, ReportFormat::Csv, p)?;
    }
    match &args.table {
        Some(p) => emit_report(&results, ReportFormat::Table, p)?,
        None => print!("{}", render_table(&results)),
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (train, test) = args.exp.load()?;
    let cfg = args.exp.config(args.budgets[0]);
    let sweep = budget_sweep(&cfg, &args.budgets, &train, &test)?;
    if let Some(p) = &args.json {
        write_file(p, &(to_json(&sweep)? + "\n"))?;
    }
    match &args.csv {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            write_sweep_csv(&sweep, file)?;
        }
        None => write_sweep_csv(&sweep, std::io::stdout().lock())?,
    }
    Ok(())
}

fn dimension(args: DimensionArgs) -> Result<()> {
    let d = dataset::load_csv(&args.data, args.label_column.as_deref())?;
    let opts = DimensionOptions {
        n_radii: args.radii,
        normalize: !args.no_normalize,
        min_pairs: args.min_pairs,
    };
    let profile = estimate_dimension(&d, &opts)?;
    match &args.out {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            write_profile_csv(&profile, file)?;
        }
        None => write_profile_csv(&profile, std::io::stdout().lock())?,
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let d = generate_synthetic(args.n, args.m, args.separation, args.positive_ratio, args.seed)?;
    dataset::save_csv(&d, &args.out, &args.label_column)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Predict(a) => predict(a),
        Command::Tune(a) => tune(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Sweep(a) => sweep(a),
        Command::Dimension(a) => dimension(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
