//! FRUGAL: grid search over the three CLA modes and C ∈ {5, 10, …, 95},
//! keeping the configuration that scores best on a small labeled validation
//! slice.
//!
//! Configurations are visited with modes outermost (CLA, CLA+ML, CLAFI+ML)
//! and C ascending; a later configuration replaces the incumbent only on a
//! strictly better score, so ties go to the earlier one.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cla::{cla_fit, cla_label, labels_of, ClaCutoffs, Prediction};
use crate::clafi::{clafi_select, project, ViolationReport, ViolationRule};
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::forest::{ForestModel, ForestParams};
use crate::metrics::{auc, confusion, AucMode};
use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "CLA")]
    Cla,
    #[serde(rename = "CLA_ML")]
    ClaMl,
    #[serde(rename = "CLAFI_ML")]
    ClafiMl,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Cla, Mode::ClaMl, Mode::ClafiMl];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cla => "CLA",
            Mode::ClaMl => "CLA_ML",
            Mode::ClafiMl => "CLAFI_ML",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// C values searched by the grid: 5, 10, …, 95.
pub fn percentile_grid() -> Vec<f64> {
    (1..=19).map(|k| f64::from(k * 5)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaConfig {
    pub mode: Mode,
    pub c: f64,
}

/// All 57 configurations in search order.
pub fn grid() -> Vec<ClaConfig> {
    Mode::ALL
        .iter()
        .flat_map(|&mode| percentile_grid().into_iter().map(move |c| ClaConfig { mode, c }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    #[default]
    Auc,
    Accuracy,
    F1,
    Recall,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::Auc => "auc",
            SelectionMetric::Accuracy => "accuracy",
            SelectionMetric::F1 => "f1",
            SelectionMetric::Recall => "recall",
        }
    }

    /// Score predictions; `None` when the metric is undefined on this data.
    pub fn score(self, predictions: &[Prediction], truth: &[Label], auc_mode: AucMode) -> Result<Option<f64>> {
        let labels = labels_of(predictions);
        let c = confusion(&labels, truth)?;
        Ok(match self {
            SelectionMetric::Auc => {
                let scores: Vec<f64> = match auc_mode {
                    AucMode::Score => predictions.iter().map(|p| p.score).collect(),
                    AucMode::HardLabel => labels.iter().map(|&l| f64::from(l)).collect(),
                };
                match auc(&scores, truth) {
                    Ok(v) => Some(v),
                    Err(Error::UndefinedMetric(_)) => None,
                    Err(e) => return Err(e),
                }
            }
            SelectionMetric::Accuracy => c.accuracy(),
            SelectionMetric::F1 => c.f1(),
            SelectionMetric::Recall => c.recall(),
        })
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where CLA-mode cutoffs come from at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffSource {
    /// Recompute cutoffs on the data being labeled (fully unsupervised).
    #[default]
    Target,
    /// Reuse the cutoffs fitted on the tuning data.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerOptions {
    pub metric: SelectionMetric,
    pub forest: ForestParams,
    pub violation_rule: ViolationRule,
    pub cla_cutoffs: CutoffSource,
    pub auc_mode: AucMode,
}

impl Default for TunerOptions {
    fn default() -> Self {
        Self {
            metric: SelectionMetric::Auc,
            forest: ForestParams::default(),
            violation_rule: ViolationRule::Proneness,
            cla_cutoffs: CutoffSource::Target,
            auc_mode: AucMode::Score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Cla {
        cutoffs: ClaCutoffs,
        source: CutoffSource,
    },
    Ml {
        cutoffs: ClaCutoffs,
        /// Present for CLAFI+ML: the feature subset and removed instances.
        selection: Option<ViolationReport>,
        forest: ForestModel,
        n_features: usize,
    },
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Cla { cutoffs, .. } => cutoffs.n_features(),
            FittedModel::Ml { n_features, .. } => *n_features,
        }
    }

    pub fn predict(&self, d: &Dataset) -> Result<Vec<Prediction>> {
        if d.n_features() != self.n_features() {
            return Err(Error::contract(format!(
                "model fitted on {} features, got {}",
                self.n_features(),
                d.n_features()
            )));
        }
        match self {
            FittedModel::Cla { cutoffs, source } => {
                if d.is_empty() {
                    return Ok(Vec::new());
                }
                match source {
                    CutoffSource::Target => cla_label(&cla_fit(d, cutoffs.c_percentile)?, d),
                    CutoffSource::Training => cla_label(cutoffs, d),
                }
            }
            FittedModel::Ml {
                selection, forest, ..
            } => match selection {
                Some(report) => forest.predict(&project(d, &report.selected_features)?),
                None => forest.predict(d),
            },
        }
    }
}

/// A fitted configuration plus any non-fatal notes raised while fitting.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: FittedModel,
    pub warnings: Vec<String>,
}

/// Fits one configuration on unlabeled tuning data. `forest_seed` seeds the
/// random forest of the +ML modes.
pub fn fit_config(
    cfg: ClaConfig,
    tuning: &Dataset,
    opts: &TunerOptions,
    forest_seed: u64,
) -> Result<Fitted> {
    if tuning.is_empty() {
        return Err(Error::contract("tuning data is empty"));
    }
    let cutoffs = cla_fit(tuning, cfg.c)?;
    if cfg.mode == Mode::Cla {
        return Ok(Fitted {
            model: FittedModel::Cla {
                cutoffs,
                source: opts.cla_cutoffs,
            },
            warnings: Vec::new(),
        });
    }

    let features = tuning.features_only();
    let pseudo = labels_of(&cla_label(&cutoffs, &features)?);
    let mut warnings = Vec::new();
    let forest_params = ForestParams {
        seed: forest_seed,
        ..opts.forest.clone()
    };
    let (selection, train) = match cfg.mode {
        Mode::ClafiMl => {
            let report = clafi_select(&features, &pseudo, &cutoffs, opts.violation_rule)?;
            let survivors = report.surviving_instances(features.n_rows());
            let kept_labels: Vec<Label> = survivors.iter().map(|&i| pseudo[i]).collect();
            let train = project(&features.select_rows(&survivors)?, &report.selected_features)?
                .with_labels(&kept_labels)?;
            (Some(report), train)
        }
        _ => {
            if !(pseudo.contains(&0) && pseudo.contains(&1)) {
                warnings.push(format!(
                    "{} C={}: pseudo-labels are single-class; forest is constant",
                    cfg.mode, cfg.c
                ));
            }
            (None, features.with_labels(&pseudo)?)
        }
    };
    let forest = ForestModel::fit(&train, &forest_params)?;
    Ok(Fitted {
        model: FittedModel::Ml {
            cutoffs,
            selection,
            forest,
            n_features: tuning.n_features(),
        },
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub mode: Mode,
    pub c: f64,
    /// Validation score; `None` when the config errored or the metric was
    /// undefined.
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TunedModel {
    pub winner: ClaConfig,
    pub validation_score: f64,
    /// Metric actually used for selection (may differ from the requested one
    /// after a fallback).
    pub metric: SelectionMetric,
    pub model: FittedModel,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

impl TunedModel {
    pub fn summary(&self) -> TuningSummary {
        TuningSummary {
            winner: self.winner,
            validation_score: self.validation_score,
            metric: self.metric,
            selected_features: match &self.model {
                FittedModel::Ml {
                    selection: Some(r), ..
                } => Some(r.selected_features.clone()),
                _ => None,
            },
            trace: self.trace.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Serializable view of a tuning run: winner block plus the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub winner: ClaConfig,
    pub validation_score: f64,
    pub metric: SelectionMetric,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_features: Option<Vec<usize>>,
    pub trace: Vec<TraceEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate_config(
    index: usize,
    cfg: ClaConfig,
    tuning: &Dataset,
    validation: &Dataset,
    truth: &[Label],
    metric: SelectionMetric,
    opts: &TunerOptions,
    seed: u64,
) -> (TraceEntry, Option<FittedModel>) {
    let forest_seed = seed::derive_seed(seed, stream::CONFIG, index as u64);
    let outcome = fit_config(cfg, tuning, opts, forest_seed).and_then(|fitted| {
        let preds = fitted.model.predict(validation)?;
        let score = metric.score(&preds, truth, opts.auc_mode)?;
        Ok((fitted, score))
    });
    match outcome {
        Ok((fitted, score)) => (
            TraceEntry {
                mode: cfg.mode,
                c: cfg.c,
                score,
                error: None,
                warnings: fitted.warnings,
            },
            Some(fitted.model),
        ),
        Err(e) => (
            TraceEntry {
                mode: cfg.mode,
                c: cfg.c,
                score: None,
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
            None,
        ),
    }
}

/// Runs the full grid. `tuning` is the unlabeled partition; `validation`
/// carries the only labels the tuner may read.
pub fn frugal_tune(
    tuning: &Dataset,
    validation: &Dataset,
    opts: &TunerOptions,
    seed: u64,
) -> Result<TunedModel> {
    if validation.is_empty() {
        return Err(Error::contract("validation slice is empty"));
    }
    if validation.n_features() != tuning.n_features() {
        return Err(Error::contract("tuning and validation schemas differ"));
    }
    let truth = validation.known_labels()?;
    let features = validation.features_only();
    let mut warnings = Vec::new();
    let mut metric = opts.metric;
    if metric == SelectionMetric::Auc && !(truth.contains(&0) && truth.contains(&1)) {
        metric = SelectionMetric::Accuracy;
        warnings.push("validation slice is single-class; selecting on accuracy instead of AUC".into());
    }

    // Evaluated in parallel, assembled in grid order.
    let configs = grid();
    let results: Vec<(TraceEntry, Option<FittedModel>)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, &cfg)| evaluate_config(i, cfg, tuning, &features, &truth, metric, opts, seed))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, (entry, _)) in results.iter().enumerate() {
        if let Some(score) = entry.score {
            // isBetter: strict improvement over the incumbent (initially -1).
            if score > best.map_or(-1.0, |b| b.1) {
                best = Some((i, score));
            }
        }
    }
    let trace: Vec<TraceEntry> = results.iter().map(|(e, _)| e.clone()).collect();
    let Some((winner_idx, validation_score)) = best else {
        let errors = trace.iter().filter(|e| e.error.is_some()).count();
        return Err(Error::Tuning(format!(
            "no configuration produced a defined {metric} score ({errors} of {} errored)",
            trace.len()
        )));
    };
    let model = results
        .into_iter()
        .nth(winner_idx)
        .and_then(|(_, m)| m)
        .expect("scored configurations keep their model");
    Ok(TunedModel {
        winner: configs[winner_idx],
        validation_score,
        metric,
        model,
        trace,
        warnings,
    })
}

/// Applies the winning model to test features.
pub fn predict_test(model: &TunedModel, test: &Dataset) -> Result<Vec<Prediction>> {
    model.model.predict(test)
}
