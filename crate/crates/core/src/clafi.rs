//! Violation-score feature selection and instance selection over
//! pseudo-labeled data.
//!
//! A feature "violates" the proneness assumption on an instance when its value
//! disagrees with the instance's pseudo-label: above the cutoff on a negative,
//! or at/below the cutoff on a positive. Features with the fewest violations
//! are kept, then instances violating on any kept feature are dropped.

use serde::{Deserialize, Serialize};

use crate::cla::ClaCutoffs;
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};

/// Which value/label pairs count as violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationRule {
    /// Above the cutoff with label 0, or at/below it with label 1.
    #[default]
    Proneness,
    /// The inverted reading: above the cutoff with label 1, or at/below it
    /// with label 0. Kept for audits only.
    Inverted,
}

impl ViolationRule {
    pub fn violates(self, value: f64, cutoff: f64, label: Label) -> bool {
        let above = value > cutoff;
        match self {
            ViolationRule::Proneness => above == (label == 0),
            ViolationRule::Inverted => above == (label == 1),
        }
    }
}

fn check_shapes(d: &Dataset, labels: &[Label], cutoffs: &ClaCutoffs) -> Result<()> {
    if labels.len() != d.n_rows() {
        return Err(Error::contract(format!(
            "{} pseudo-labels for {} rows",
            labels.len(),
            d.n_rows()
        )));
    }
    if cutoffs.n_features() != d.n_features() {
        return Err(Error::contract(format!(
            "cutoffs cover {} features, dataset has {}",
            cutoffs.n_features(),
            d.n_features()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::contract("pseudo-labels must be 0 or 1"));
    }
    Ok(())
}

/// Pseudo-labels of a dataset, failing on any unknown label.
pub fn pseudo_labels(d: &Dataset) -> Result<Vec<Label>> {
    d.known_labels()
}

/// Per-feature violation counts.
pub fn violation_scores(
    d: &Dataset,
    labels: &[Label],
    cutoffs: &ClaCutoffs,
    rule: ViolationRule,
) -> Result<Vec<usize>> {
    check_shapes(d, labels, cutoffs)?;
    let mut scores = vec![0; d.n_features()];
    for (row, &label) in d.rows().zip(labels) {
        for (j, (&v, &cut)) in row.iter().zip(&cutoffs.cutoffs).enumerate() {
            if rule.violates(v, cut, label) {
                scores[j] += 1;
            }
        }
    }
    Ok(scores)
}

/// Features whose score equals the `(tier+1)`-th smallest distinct score.
pub fn select_features(scores: &[usize], tier: usize) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::contract("no violation scores"));
    }
    let mut distinct = scores.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let target = *distinct.get(tier).ok_or(Error::TierExhausted {
        tier,
        distinct: distinct.len(),
    })?;
    Ok(scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s == target)
        .map(|(j, _)| j)
        .collect())
}

/// Outcome of instance selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Survivors {
    /// Survivors contain both classes.
    TwoClass(Vec<usize>),
    /// Survivors are empty or single-class; the caller should try the next tier.
    RetryNeeded(Vec<usize>),
}

/// Keeps instances with zero violations on every selected feature.
pub fn select_instances(
    d: &Dataset,
    labels: &[Label],
    cutoffs: &ClaCutoffs,
    selected: &[usize],
    rule: ViolationRule,
) -> Result<Survivors> {
    check_shapes(d, labels, cutoffs)?;
    if selected.is_empty() {
        return Err(Error::contract("empty feature selection"));
    }
    if let Some(&bad) = selected.iter().find(|&&j| j >= d.n_features()) {
        return Err(Error::contract(format!("selected feature {bad} out of range")));
    }
    let survivors: Vec<usize> = (0..d.n_rows())
        .filter(|&i| {
            let row = d.row(i);
            selected
                .iter()
                .all(|&j| !rule.violates(row[j], cutoffs.cutoffs[j], labels[i]))
        })
        .collect();
    let has = |class: Label| survivors.iter().any(|&i| labels[i] == class);
    Ok(if has(0) && has(1) {
        Survivors::TwoClass(survivors)
    } else {
        Survivors::RetryNeeded(survivors)
    })
}

/// Column projection. Thin wrapper kept for symmetry with the selection steps.
pub fn project(d: &Dataset, selected: &[usize]) -> Result<Dataset> {
    if selected.is_empty() {
        return Err(Error::contract("empty feature selection"));
    }
    d.select_columns(selected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub scores: Vec<usize>,
    pub selected_features: Vec<usize>,
    pub removed_instances: Vec<usize>,
    /// Number of minimum-score tiers skipped before a two-class survivor set
    /// was found.
    pub fallback_depth: usize,
}

impl ViolationReport {
    pub fn surviving_instances(&self, n_rows: usize) -> Vec<usize> {
        let mut removed = self.removed_instances.iter().peekable();
        (0..n_rows)
            .filter(|i| {
                if removed.peek() == Some(&i) {
                    removed.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

/// Full feature and instance selection: walk violation-score tiers from the
/// minimum upward until the surviving instances hold both classes.
pub fn clafi_select(
    d: &Dataset,
    labels: &[Label],
    cutoffs: &ClaCutoffs,
    rule: ViolationRule,
) -> Result<ViolationReport> {
    let scores = violation_scores(d, labels, cutoffs, rule)?;
    for tier in 0.. {
        let selected = match select_features(&scores, tier) {
            Ok(s) => s,
            Err(Error::TierExhausted { .. }) => break,
            Err(e) => return Err(e),
        };
        if let Survivors::TwoClass(survivors) =
            select_instances(d, labels, cutoffs, &selected, rule)?
        {
            let keep: std::collections::HashSet<usize> = survivors.into_iter().collect();
            return Ok(ViolationReport {
                scores,
                selected_features: selected,
                removed_instances: (0..d.n_rows()).filter(|i| !keep.contains(i)).collect(),
                fallback_depth: tier,
            });
        }
    }
    Err(Error::Degenerate(
        "no violation-score tier leaves survivors of both classes".into(),
    ))
}
