//! Experiment runner: test bins crossed with train samples (5 × 5 = 25 runs by
//! default), label-budget sweeps, synthetic data and report emission.
//!
//! Every run derives its seeds from the master seed and its (bin, sample)
//! position, and reports are assembled in canonical run order, so the output
//! does not depend on execution order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    reveal_labels, Dataset, LabelCounter, Label, PlanOptions, SplitPlan, ValidationDraw,
};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, evaluate, median_iqr, medium_effect, similar, EvalReport, MetricAggregate,
    MetricName,
};
use crate::seed::{self, stream};
use crate::tuner::{fit_config, frugal_tune, predict_test, ClaConfig, Mode, SelectionMetric, TunerOptions, TuningSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Treatment {
    Cla,
    ClaMl,
    ClafiMl,
    Frugal,
}

impl Treatment {
    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::Cla => "cla",
            Treatment::ClaMl => "cla-ml",
            Treatment::ClafiMl => "clafi-ml",
            Treatment::Frugal => "frugal",
        }
    }

    fn fixed_mode(self) -> Option<Mode> {
        match self {
            Treatment::Cla => Some(Mode::Cla),
            Treatment::ClaMl => Some(Mode::ClaMl),
            Treatment::ClafiMl => Some(Mode::ClafiMl),
            Treatment::Frugal => None,
        }
    }
}

impl std::str::FromStr for Treatment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cla" => Ok(Treatment::Cla),
            "cla-ml" => Ok(Treatment::ClaMl),
            "clafi-ml" => Ok(Treatment::ClafiMl),
            "frugal" => Ok(Treatment::Frugal),
            other => Err(format!("unknown treatment {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Name used in reports.
    pub dataset: String,
    pub treatment: Treatment,
    /// Percentile for the fixed-C treatments; must be absent for FRUGAL.
    pub c: Option<f64>,
    pub label_budget: f64,
    pub seed: u64,
    pub bins: usize,
    pub samples: usize,
    pub sample_fraction: f64,
    pub validation: ValidationDraw,
    pub tuner: TunerOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "data".into(),
            treatment: Treatment::Frugal,
            c: None,
            label_budget: 0.025,
            seed: 0,
            bins: 5,
            samples: 5,
            sample_fraction: 1.0,
            validation: ValidationDraw::Stratified,
            tuner: TunerOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.label_budget > 0.0 && self.label_budget <= 1.0) {
            return Err(Error::contract(format!(
                "label budget {} outside (0, 1]",
                self.label_budget
            )));
        }
        if self.bins == 0 || self.samples == 0 {
            return Err(Error::contract("bins and samples must be at least 1"));
        }
        match (self.treatment, self.c) {
            (Treatment::Frugal, Some(_)) => {
                Err(Error::contract("frugal searches C itself; do not pass c"))
            }
            (Treatment::Frugal, None) => Ok(()),
            (t, None) => Err(Error::contract(format!("treatment {} needs c", t.as_str()))),
            (_, Some(c)) if !(c > 0.0 && c < 100.0) => {
                Err(Error::contract(format!("c {c} outside (0, 100)")))
            }
            _ => Ok(()),
        }
    }

    fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            bins: self.bins,
            samples: self.samples,
            label_budget: self.label_budget,
            sample_fraction: self.sample_fraction,
            validation: self.validation,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub bin: usize,
    pub sample: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    /// True labels read on the learner's behalf.
    pub label_reads: usize,
    /// Reads of rows outside the validation slice; always 0 for an honest run.
    pub reads_outside_validation: usize,
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub bin: usize,
    pub sample: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub aggregate: Vec<MetricAggregate>,
    pub total_label_reads: usize,
}

impl ExperimentResult {
    pub fn aggregate_of(&self, metric: MetricName) -> Option<&MetricAggregate> {
        self.aggregate.iter().find(|a| a.metric == metric)
    }

    pub fn values_of(&self, metric: MetricName) -> Vec<f64> {
        self.runs.iter().filter_map(|r| metric.of(&r.report)).collect()
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    plan: &SplitPlan,
    bin: usize,
    sample: usize,
) -> Result<RunRecord> {
    let run_seed = seed::derive_seed(cfg.seed, stream::RUN, (bin * cfg.samples + sample) as u64);
    let test_bin = test.select_rows(&plan.test_bins[bin])?;
    let truth: Vec<Label> = test_bin.known_labels()?;
    let test_x = test_bin.features_only();
    let train_sample = &plan.train_samples[sample];
    let counter = LabelCounter::new();

    let (predictions, tuning, warnings) = match cfg.treatment.fixed_mode() {
        None => {
            let views = reveal_labels(train, plan, sample, &counter)?;
            let tuned = frugal_tune(&views.tuning, &views.validation, &cfg.tuner, run_seed)?;
            let preds = predict_test(&tuned, &test_x)?;
            let summary = tuned.summary();
            (preds, Some(summary), tuned.warnings)
        }
        Some(mode) => {
            // Fixed-C learners are label-free: fit on the whole sample.
            let sample_x = train.select_rows(&train_sample.indices)?.features_only();
            let c = cfg.c.expect("validated");
            let fitted = fit_config(
                ClaConfig { mode, c },
                &sample_x,
                &cfg.tuner,
                seed::derive_seed(run_seed, stream::CONFIG, 0),
            )?;
            (fitted.model.predict(&test_x)?, None, fitted.warnings)
        }
    };

    let label_reads = counter.reads();
    let allowed: BTreeSet<usize> = train_sample.validation_indices.iter().copied().collect();
    let reads_outside_validation = counter
        .revealed_indices()
        .iter()
        .filter(|i| !allowed.contains(i))
        .count();
    let cost = crate::metrics::cost(label_reads, train_sample.indices.len())?;
    let report = evaluate(&predictions, &truth, cfg.tuner.auc_mode, cost)?;
    Ok(RunRecord {
        bin,
        sample,
        seed: run_seed,
        train_rows: train_sample.indices.len(),
        test_rows: test_bin.n_rows(),
        label_reads,
        reads_outside_validation,
        report,
        tuning,
        warnings,
    })
}

/// Runs every (test bin, train sample) pair and aggregates the reports.
///
/// A failing run is recorded and skipped; the experiment fails only when no
/// run succeeds.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if train.n_features() != test.n_features() {
        return Err(Error::Schema(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    let plan = SplitPlan::build(train, test, &cfg.plan_options())?;
    let cells: Vec<(usize, usize)> = (0..cfg.bins)
        .flat_map(|b| (0..cfg.samples).map(move |s| (b, s)))
        .collect();
    let outcomes: Vec<Result<RunRecord>> = cells
        .par_iter()
        .map(|&(b, s)| run_one(cfg, train, test, &plan, b, s))
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&(bin, sample), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(RunFailure {
                bin,
                sample,
                error: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        let first = failures.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(Error::Tuning(format!("every run failed; first error: {first}")));
    }
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.report).collect();
    let total_label_reads = runs.iter().map(|r| r.label_reads).sum();
    Ok(ExperimentResult {
        config: cfg.clone(),
        aggregate: aggregate(&reports)?,
        runs,
        failures,
        total_label_reads,
    })
}

pub fn headline_metric(metric: SelectionMetric) -> MetricName {
    match metric {
        SelectionMetric::Auc => MetricName::Auc,
        SelectionMetric::Accuracy => MetricName::Accuracy,
        SelectionMetric::F1 => MetricName::F1,
        SelectionMetric::Recall => MetricName::Recall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPair {
    pub from: f64,
    pub to: f64,
    pub median_from: Option<f64>,
    pub median_to: Option<f64>,
    pub similar: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub headline: MetricName,
    /// Threshold from the pooled per-run headline values of every budget.
    pub medium_effect: Option<f64>,
    pub budgets: Vec<f64>,
    pub results: Vec<ExperimentResult>,
    /// Adjacent budget pairs.
    pub pairs: Vec<BudgetPair>,
}

impl SweepResult {
    pub fn median_at(&self, i: usize) -> Option<f64> {
        self.results[i].aggregate_of(self.headline).and_then(|a| a.median)
    }

    /// Whether budgets `i` and `j` are similar on the headline metric.
    pub fn similar(&self, i: usize, j: usize) -> Option<bool> {
        Some(similar(self.median_at(i)?, self.median_at(j)?, self.medium_effect?))
    }
}

/// Runs the experiment once per budget with the same seed, then flags adjacent
/// budgets as similar or different on the headline metric.
pub fn budget_sweep(
    cfg: &ExperimentConfig,
    budgets: &[f64],
    train: &Dataset,
    test: &Dataset,
) -> Result<SweepResult> {
    if budgets.is_empty() {
        return Err(Error::contract("no budgets given"));
    }
    if budgets.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
        return Err(Error::contract("budgets must lie in (0, 1]"));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("budgets must be strictly ascending"));
    }
    let results = budgets
        .iter()
        .map(|&b| {
            let cfg = ExperimentConfig {
                label_budget: b,
                ..cfg.clone()
            };
            run_experiment(&cfg, train, test)
        })
        .collect::<Result<Vec<_>>>()?;
    let headline = headline_metric(cfg.tuner.metric);
    let pooled: Vec<f64> = results.iter().flat_map(|r| r.values_of(headline)).collect();
    let m = if budgets.len() > 1 {
        medium_effect(&pooled).ok()
    } else {
        None
    };
    let mut sweep = SweepResult {
        headline,
        medium_effect: m,
        budgets: budgets.to_vec(),
        results,
        pairs: Vec::new(),
    };
    sweep.pairs = (1..budgets.len())
        .map(|i| BudgetPair {
            from: budgets[i - 1],
            to: budgets[i],
            median_from: sweep.median_at(i - 1),
            median_to: sweep.median_at(i),
            similar: sweep.similar(i - 1, i),
        })
        .collect();
    Ok(sweep)
}

/// Planted-structure data: negatives draw each feature from U[0, 1],
/// positives from U[separation, 1 + separation]. Exactly
/// `round(n · positive_ratio)` rows are positive, in random positions.
pub fn generate_synthetic(
    n: usize,
    m: usize,
    separation: f64,
    positive_ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || m == 0 {
        return Err(Error::contract("n and m must be at least 1"));
    }
    if !(positive_ratio > 0.0 && positive_ratio < 1.0) {
        return Err(Error::contract("positive_ratio must lie in (0, 1)"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::contract("separation must be a non-negative real"));
    }
    let mut rng = seed::rng(seed::derive_seed(seed, stream::SYNTH, 0));
    let n_pos = (n as f64 * positive_ratio).round() as usize;
    let mut labels: Vec<Label> = (0..n).map(|i| Label::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);
    let rows = labels
        .iter()
        .map(|&y| {
            let offset = if y == 1 { separation } else { 0.0 };
            (0..m).map(|_| offset + rng.gen::<f64>()).collect()
        })
        .collect();
    Dataset::from_rows(rows, Some(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per (treatment, metric): median and IQR over the runs.
pub fn write_aggregate_csv<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["treatment", "dataset", "metric", "median", "iqr", "defined", "undefined", "failures"])?;
    for r in results {
        for a in &r.aggregate {
            w.write_record([
                r.config.treatment.as_str().to_string(),
                r.config.dataset.clone(),
                a.metric.to_string(),
                fmt_opt(a.median),
                fmt_opt(a.iqr),
                a.defined.to_string(),
                a.undefined.to_string(),
                r.failures.len().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Aligned text: one line per treatment, median (IQR) per metric, in percent.
pub fn render_table(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:<12}", "treatment", "dataset");
    for m in MetricName::ALL {
        let _ = write!(out, " {:>15}", m.as_str());
    }
    out.push('\n');
    for r in results {
        let _ = write!(out, "{:<10} {:<12}", r.config.treatment.as_str(), r.config.dataset);
        for m in MetricName::ALL {
            let cell = match r.aggregate_of(m) {
                Some(MetricAggregate {
                    median: Some(med),
                    iqr: Some(iqr),
                    ..
                }) => format!("{:.1} ({:.1})", med * 100.0, iqr * 100.0),
                _ => "n/a".to_string(),
            };
            let _ = write!(out, " {cell:>15}");
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Writes `results` in `format` to `path`.
pub fn emit_report(results: &[ExperimentResult], format: ReportFormat, path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::contract("no results to report"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Json => {
            let text = if results.len() == 1 {
                to_json(&results[0])?
            } else {
                to_json(&results)?
            };
            w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        ReportFormat::Csv => write_aggregate_csv(results, &mut w)?,
        ReportFormat::Table => w
            .write_all(render_table(results).as_bytes())
            .map_err(|e| Error::io(path, e))?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Budget sweep as CSV: one row per budget with the headline median/IQR and
/// the similarity flag against the previous budget.
pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["budget", "metric", "median", "iqr", "label_reads", "similar_to_previous", "medium_effect"])?;
    for (i, r) in sweep.results.iter().enumerate() {
        let agg = r.aggregate_of(sweep.headline);
        let flag = if i == 0 {
            String::new()
        } else {
            sweep.pairs[i - 1].similar.map(|s| s.to_string()).unwrap_or_default()
        };
        w.write_record([
            sweep.budgets[i].to_string(),
            sweep.headline.to_string(),
            fmt_opt(agg.and_then(|a| a.median)),
            fmt_opt(agg.and_then(|a| a.iqr)),
            r.total_label_reads.to_string(),
            flag,
            fmt_opt(sweep.medium_effect),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Median and IQR recomputed from raw per-run values (what an external
/// script would do with the JSON).
pub fn recompute_median_iqr(values: &[f64]) -> Option<(f64, f64)> {
    median_iqr(values)
}
