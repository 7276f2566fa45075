//! Percentile-clustering learners (CLA, CLA+ML, CLAFI+ML), the FRUGAL grid
//! search that picks among them using a small labeled validation slice, and
//! the evaluation harness around them.
//!
//! Module map:
//!
//! - [`dataset`]: tabular data, CSV I/O, stratified splits, label budget accounting
//! - [`cla`]: percentile cutoffs, exceedance counts, CLA labeling
//! - [`clafi`]: violation-score feature and instance selection
//! - [`forest`]: entropy-split random forest
//! - [`tuner`]: the 57-configuration grid search
//! - [`metrics`]: confusion metrics, AUC, cost, medium-effect threshold
//! - [`dimension`]: correlation-sum intrinsic dimensionality
//! - [`harness`]: the bins × samples protocol, budget sweeps, reports

pub mod cla;
pub mod clafi;
pub mod dataset;
pub mod dimension;
pub mod error;
pub mod forest;
pub mod harness;
pub mod metrics;
pub mod seed;
pub mod tuner;

pub use cla::{cla_fit, cla_label, percentile, ClaCutoffs, Prediction};
pub use dataset::{load_csv, Dataset, Label, LabelCounter, SplitPlan};
pub use error::{Error, Result};
pub use forest::{ForestModel, ForestParams};
pub use harness::{budget_sweep, generate_synthetic, run_experiment, ExperimentConfig, Treatment};
pub use metrics::{auc, EvalReport};
pub use tuner::{frugal_tune, ClaConfig, Mode, SelectionMetric, TunedModel, TunerOptions};
