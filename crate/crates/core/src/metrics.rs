//! Classification metrics, labeling cost, and the medium-effect threshold used
//! to call two results "similar".
//!
//! Metrics whose denominator is zero are `None` (undefined) rather than zero, so
//! aggregates over degenerate folds stay honest.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cla::{percentile_sorted, Prediction};
use crate::dataset::Label;
use crate::error::{Error, Result};

/// Multiplier on the standard deviation of all results (between Cohen's small
/// and medium effect sizes).
pub const MEDIUM_EFFECT_D: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Harmonic mean of precision and recall; undefined when either is. When
    /// both are zero the value is 0 (`2tp / (2tp + fp + fn)`).
    pub fn f1(&self) -> Option<f64> {
        self.precision()?;
        self.recall()?;
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// False-alarm rate: share of true negatives predicted positive.
    pub fn far(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }
}

pub fn confusion(predicted: &[Label], truth: &[Label]) -> Result<Confusion> {
    if predicted.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(Error::contract("labels must be 0 or 1")),
        }
    }
    Ok(c)
}

/// Area under the ROC curve in Mann–Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties counting
/// one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} scores for {} truths",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::contract("non-finite score"));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.iter().filter(|&&t| t == 0).count();
    if n_pos + n_neg != truth.len() {
        return Err(Error::contract("labels must be 0 or 1"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| truth[i] == 1).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of instances whose labels a human had to provide.
pub fn cost(revealed: usize, total: usize) -> Result<f64> {
    if total == 0 || revealed > total {
        return Err(Error::contract(format!(
            "cost needs 0 <= revealed <= total and total > 0, got {revealed}/{total}"
        )));
    }
    Ok(revealed as f64 / total as f64)
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::contract("standard deviation needs at least two values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// Medium-effect threshold `M = 0.35 · sd(all results)`.
pub fn medium_effect(all_results: &[f64]) -> Result<f64> {
    Ok(MEDIUM_EFFECT_D * sample_std(all_results)?)
}

/// Two results are similar when they differ by at most `m`.
pub fn similar(a: f64, b: f64, m: f64) -> bool {
    (a - b).abs() <= m
}

/// How AUC is computed from predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AucMode {
    /// Rank by the continuous score (exceedance count or vote fraction).
    #[default]
    Score,
    /// Rank by the hard label; equals balanced accuracy.
    HardLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub far: Option<f64>,
    pub accuracy: Option<f64>,
    pub cost: f64,
}

/// Scores predictions against the truth. `cost` is supplied by the caller,
/// who knows how many labels were revealed.
pub fn evaluate(
    predictions: &[Prediction],
    truth: &[Label],
    auc_mode: AucMode,
    cost: f64,
) -> Result<EvalReport> {
    let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    let c = confusion(&labels, truth)?;
    let scores: Vec<f64> = match auc_mode {
        AucMode::Score => predictions.iter().map(|p| p.score).collect(),
        AucMode::HardLabel => labels.iter().map(|&l| f64::from(l)).collect(),
    };
    let auc = match auc(&scores, truth) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        auc,
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        far: c.far(),
        accuracy: c.accuracy(),
        cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Auc,
    Precision,
    Recall,
    F1,
    Far,
    Accuracy,
    Cost,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Auc,
        MetricName::Precision,
        MetricName::Recall,
        MetricName::F1,
        MetricName::Far,
        MetricName::Accuracy,
        MetricName::Cost,
    ];

    pub fn of(self, r: &EvalReport) -> Option<f64> {
        match self {
            MetricName::Auc => r.auc,
            MetricName::Precision => r.precision,
            MetricName::Recall => r.recall,
            MetricName::F1 => r.f1,
            MetricName::Far => r.far,
            MetricName::Accuracy => r.accuracy,
            MetricName::Cost => Some(r.cost),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Auc => "auc",
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::F1 => "f1",
            MetricName::Far => "far",
            MetricName::Accuracy => "accuracy",
            MetricName::Cost => "cost",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Median and inter-quartile range of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub metric: MetricName,
    pub median: Option<f64>,
    /// 75th minus 25th percentile.
    pub iqr: Option<f64>,
    pub defined: usize,
    /// Runs where the metric was undefined and therefore excluded.
    pub undefined: usize,
}

/// Median and IQR of a set of values with the shared percentile routine.
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = percentile_sorted(&sorted, 50.0);
    let iqr = percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0);
    Some((median, iqr))
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Vec<MetricAggregate>> {
    if reports.is_empty() {
        return Err(Error::contract("nothing to aggregate"));
    }
    Ok(MetricName::ALL
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = reports.iter().filter_map(|r| metric.of(r)).collect();
            let stats = median_iqr(&values);
            MetricAggregate {
                metric,
                median: stats.map(|s| s.0),
                iqr: stats.map(|s| s.1),
                defined: values.len(),
                undefined: reports.len() - values.len(),
            }
        })
        .collect())
}
