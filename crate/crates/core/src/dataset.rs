//! Tabular data model, CSV ingestion, stratified splitting and label-budget
//! accounting.
//!
//! A [`Dataset`] is immutable once built. Labels are optional and each one may
//! independently be unknown, which is how the tuning partition is handed to
//! learners: the rows are there, the labels are not.

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// A binary class label. `1` is the positive (problematic) class.
pub type Label = u8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    /// Row-major `n_rows * n_features` matrix.
    values: Vec<f64>,
    n_rows: usize,
    labels: Option<Vec<Option<Label>>>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<Option<Label>>>,
    ) -> Result<Self> {
        let m = feature_names.len();
        let mut seen = HashSet::with_capacity(m);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, expected {m}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::contract(format!(
                    "non-finite value at row {i}, feature {}",
                    feature_names[j]
                )));
            }
            values.extend(row);
        }
        if let Some(labels) = &labels {
            if labels.len() != n_rows {
                return Err(Error::Schema(format!(
                    "{} labels for {n_rows} rows",
                    labels.len()
                )));
            }
            if let Some(bad) = labels.iter().flatten().find(|&&l| l > 1) {
                return Err(Error::contract(format!("label {bad} is not 0 or 1")));
            }
        }
        Ok(Self {
            feature_names,
            values,
            n_rows,
            labels,
        })
    }

    /// Builds a dataset with generated feature names `f1..fm`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<Label>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let names = (1..=m).map(|j| format!("f{j}")).collect();
        Self::new(names, rows, labels.map(|l| l.into_iter().map(Some).collect()))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, j)).collect()
    }

    pub fn labels(&self) -> Option<&[Option<Label>]> {
        self.labels.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// All labels, failing if any is missing or unknown.
    pub fn known_labels(&self) -> Result<Vec<Label>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::contract("dataset has no labels"))?;
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| Error::contract(format!("label of row {i} is unknown"))))
            .collect()
    }

    /// Same rows, labels dropped.
    pub fn features_only(&self) -> Dataset {
        Dataset {
            labels: None,
            ..self.clone()
        }
    }

    /// Same rows with the given (fully known) labels attached.
    pub fn with_labels(&self, labels: &[Label]) -> Result<Dataset> {
        if labels.len() != self.n_rows {
            return Err(Error::contract(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::contract("labels must be 0 or 1"));
        }
        Ok(Dataset {
            labels: Some(labels.iter().copied().map(Some).collect()),
            ..self.clone()
        })
    }

    /// Rows at `indices`, in that order. Labels travel with their rows.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let m = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::contract(format!(
                    "row index {i} out of range for {} rows",
                    self.n_rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            values,
            n_rows: indices.len(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        })
    }

    /// Columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Dataset> {
        let m = self.n_features();
        if let Some(&bad) = indices.iter().find(|&&j| j >= m) {
            return Err(Error::contract(format!(
                "feature index {bad} out of range for {m} features"
            )));
        }
        let mut values = Vec::with_capacity(self.n_rows * indices.len());
        for row in self.rows() {
            values.extend(indices.iter().map(|&j| row[j]));
        }
        Ok(Dataset {
            feature_names: indices.iter().map(|&j| self.feature_names[j].clone()).collect(),
            values,
            n_rows: self.n_rows,
            labels: self.labels.clone(),
        })
    }
}

/// Reads a CSV file. See [`read_csv`].
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

/// Parses a headed CSV table. Every column except `label_column` must hold
/// finite reals; label cells must be `0`, `1` or empty (unknown).
///
/// Row numbers in errors are file line numbers, so the first data row is row 2.
pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();

    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::Schema(format!("duplicate header {name:?}")));
        }
    }
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("label column {name:?} not in header")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {line} has {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                let label = match cell {
                    "" => None,
                    "0" => Some(0),
                    "1" => Some(1),
                    other => {
                        return Err(Error::Parse {
                            row: line,
                            column: header[j].clone(),
                            message: format!("label {other:?} is not 0, 1 or empty"),
                        })
                    }
                };
                if let Some(labels) = labels.as_mut() {
                    labels.push(label);
                }
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: header[j].clone(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: header[j].clone(),
                    message: format!("{cell:?} is not finite"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    Dataset::new(feature_names, rows, labels)
}

/// Writes the dataset as CSV, appending the label column last when present.
pub fn write_csv<W: Write>(d: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    if d.has_labels() {
        header.push(label_column);
    }
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut record: Vec<String> = d.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = d.labels() {
            record.push(labels[i].map(|l| l.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(d, std::io::BufWriter::new(file), label_column)
}

/// Number of labels revealed for a budget fraction over `n` rows: `⌈budget·n⌉`.
pub fn budget_count(budget: f64, n: usize) -> usize {
    // Absorb representation error such as 0.1 * 30 = 3.0000000000000004.
    let raw = budget * n as f64;
    let count = (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize;
    count.min(n)
}

fn class_indices(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        out[l as usize].push(i);
    }
    out
}

/// Stratified partition of `labels` into `bins` disjoint bins.
///
/// Each class's indices are shuffled and dealt round-robin; the dealing of the
/// second class continues where the first stopped, so bin sizes differ by at
/// most one as well.
pub fn stratify_labels(labels: &[Label], bins: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if bins == 0 {
        return Err(Error::contract("bins must be positive"));
    }
    let mut classes = class_indices(labels);
    let minority = classes
        .iter()
        .map(Vec::len)
        .filter(|&c| c > 0)
        .min()
        .unwrap_or(0);
    let present = classes.iter().filter(|c| !c.is_empty()).count();
    // A single-class set stratifies trivially; with two classes every bin must
    // receive at least one minority instance.
    let limit = if present == 2 { minority } else { labels.len() };
    if bins > limit {
        return Err(Error::Infeasible(format!(
            "{bins} bins requested but the minority class has only {limit} instances"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut out = vec![Vec::new(); bins];
    let mut next = 0;
    // Positives first so the minority (typically) is dealt from bin 0.
    for class in classes.iter_mut().rev() {
        class.shuffle(&mut rng);
        for &i in class.iter() {
            out[next].push(i);
            next = (next + 1) % bins;
        }
    }
    for bin in &mut out {
        bin.sort_unstable();
    }
    Ok(out)
}

/// Stratified split of a fully labeled dataset into `bins` index partitions.
pub fn stratified_split(d: &Dataset, bins: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let labels = d.known_labels()?;
    stratify_labels(&labels, bins, seed)
}

/// How the labeled validation slice is drawn from a train sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValidationDraw {
    /// Preserve the class ratio, keeping both classes whenever the slice has
    /// room for two labels.
    #[default]
    Stratified,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    /// Train-set row indices in this sample, ascending.
    pub indices: Vec<usize>,
    /// Subset of `indices` whose labels are revealed, ascending.
    pub validation_indices: Vec<usize>,
}

impl TrainSample {
    /// Sample rows outside the validation slice.
    pub fn tuning_indices(&self) -> Vec<usize> {
        let val: BTreeSet<usize> = self.validation_indices.iter().copied().collect();
        self.indices
            .iter()
            .copied()
            .filter(|i| !val.contains(i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub bins: usize,
    pub samples: usize,
    pub label_budget: f64,
    /// Fraction of the train set drawn (stratified) into each sample.
    pub sample_fraction: f64,
    pub validation: ValidationDraw,
    pub seed: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            bins: 5,
            samples: 5,
            label_budget: 0.025,
            sample_fraction: 1.0,
            validation: ValidationDraw::Stratified,
            seed: 0,
        }
    }
}

/// The partition bookkeeping for one experiment: test bins crossed with train
/// samples, each sample carrying its validation slice.
///
/// Building a plan reads every label; it plays the experimenter who holds the
/// ground truth. Learners only ever see the views produced by [`reveal_labels`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_bins: Vec<Vec<usize>>,
    pub train_samples: Vec<TrainSample>,
    pub label_budget: f64,
}

impl SplitPlan {
    pub fn build(train: &Dataset, test: &Dataset, opts: &PlanOptions) -> Result<Self> {
        if !(opts.label_budget > 0.0 && opts.label_budget <= 1.0) {
            return Err(Error::contract(format!(
                "label budget {} outside (0, 1]",
                opts.label_budget
            )));
        }
        if !(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0) {
            return Err(Error::contract(format!(
                "sample fraction {} outside (0, 1]",
                opts.sample_fraction
            )));
        }
        if opts.samples == 0 {
            return Err(Error::contract("samples must be positive"));
        }
        let test_labels = test.known_labels()?;
        let test_bins = stratify_labels(
            &test_labels,
            opts.bins,
            seed::derive_seed(opts.seed, stream::TEST_BINS, 0),
        )?;

        let train_labels = train.known_labels()?;
        let train_samples = (0..opts.samples)
            .map(|s| {
                let indices = stratified_sample(
                    &train_labels,
                    opts.sample_fraction,
                    seed::derive_seed(opts.seed, stream::TRAIN_SAMPLE, s as u64),
                );
                let validation_indices = draw_validation(
                    &train_labels,
                    &indices,
                    opts.label_budget,
                    opts.validation,
                    seed::derive_seed(opts.seed, stream::VALIDATION, s as u64),
                );
                TrainSample {
                    indices,
                    validation_indices,
                }
            })
            .collect();
        Ok(Self {
            test_bins,
            train_samples,
            label_budget: opts.label_budget,
        })
    }
}

fn stratified_sample(labels: &[Label], fraction: f64, seed: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..labels.len()).collect();
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::new();
    for mut class in class_indices(labels) {
        class.shuffle(&mut rng);
        let take = ((class.len() as f64 * fraction).round() as usize)
            .max(usize::from(!class.is_empty()))
            .min(class.len());
        out.extend_from_slice(&class[..take]);
    }
    out.sort_unstable();
    out
}

fn draw_validation(
    labels: &[Label],
    sample: &[usize],
    budget: f64,
    draw: ValidationDraw,
    seed: u64,
) -> Vec<usize> {
    let k = budget_count(budget, sample.len());
    let mut rng = seed::rng(seed);
    let mut out = match draw {
        ValidationDraw::Uniform => {
            let mut pool = sample.to_vec();
            pool.shuffle(&mut rng);
            pool.truncate(k);
            pool
        }
        ValidationDraw::Stratified => {
            let mut pos: Vec<usize> = sample.iter().copied().filter(|&i| labels[i] == 1).collect();
            let mut neg: Vec<usize> = sample.iter().copied().filter(|&i| labels[i] == 0).collect();
            let n = sample.len().max(1);
            let mut k_pos = ((k * pos.len()) as f64 / n as f64).round() as usize;
            if k >= 2 && !pos.is_empty() && !neg.is_empty() {
                k_pos = k_pos.clamp(1, k - 1);
            }
            // Respect class availability.
            k_pos = k_pos.min(pos.len()).max(k.saturating_sub(neg.len()));
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            pos.truncate(k_pos);
            neg.truncate(k - k_pos);
            pos.extend(neg);
            pos
        }
    };
    out.sort_unstable();
    out
}

/// Counts every true-label read made on behalf of a learner.
///
/// The counter is the numerator of the Cost metric and the audit trail for
/// budget honesty: the set of revealed rows must equal the validation slice.
#[derive(Debug, Default)]
pub struct LabelCounter {
    reads: AtomicUsize,
    revealed: Mutex<Vec<usize>>,
}

impl LabelCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }

    /// Row indices read so far, sorted (duplicates kept).
    pub fn revealed_indices(&self) -> Vec<usize> {
        let mut v = self.revealed.lock().expect("label counter poisoned").clone();
        v.sort_unstable();
        v
    }

    fn read(&self, d: &Dataset, i: usize) -> Result<Label> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        self.revealed
            .lock()
            .expect("label counter poisoned")
            .push(i);
        d.labels()
            .and_then(|l| l[i])
            .ok_or_else(|| Error::contract(format!("train row {i} has no known label")))
    }
}

/// The two views handed to a tuner for one train sample.
#[derive(Debug, Clone)]
pub struct RevealedViews {
    /// Validation rows with their true labels.
    pub validation: Dataset,
    /// Remaining sample rows, features only.
    pub tuning: Dataset,
    pub validation_indices: Vec<usize>,
    pub tuning_indices: Vec<usize>,
}

/// Splits train sample `sample` of `plan` into a labeled validation view and
/// an unlabeled tuning view, recording each label read in `counter`.
pub fn reveal_labels(
    train: &Dataset,
    plan: &SplitPlan,
    sample: usize,
    counter: &LabelCounter,
) -> Result<RevealedViews> {
    let ts = plan.train_samples.get(sample).ok_or_else(|| {
        Error::contract(format!(
            "sample {sample} out of range for {} samples",
            plan.train_samples.len()
        ))
    })?;
    let labels = ts
        .validation_indices
        .iter()
        .map(|&i| counter.read(train, i))
        .collect::<Result<Vec<_>>>()?;
    let validation = train
        .select_rows(&ts.validation_indices)?
        .features_only()
        .with_labels(&labels)?;
    let tuning_indices = ts.tuning_indices();
    let tuning = train.select_rows(&tuning_indices)?.features_only();
    Ok(RevealedViews {
        validation,
        tuning,
        validation_indices: ts.validation_indices.clone(),
        tuning_indices,
    })
}

/// Draws a validation slice of `⌈budget·n⌉` rows from the whole of `train`
/// and reveals it, for one-off tuning outside the benchmark protocol.
pub fn holdout_views(
    train: &Dataset,
    budget: f64,
    draw: ValidationDraw,
    seed: u64,
    counter: &LabelCounter,
) -> Result<RevealedViews> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::contract(format!("label budget {budget} outside (0, 1]")));
    }
    let labels = train.known_labels()?;
    let indices: Vec<usize> = (0..train.n_rows()).collect();
    let validation_indices = draw_validation(
        &labels,
        &indices,
        budget,
        draw,
        seed::derive_seed(seed, stream::VALIDATION, 0),
    );
    let plan = SplitPlan {
        test_bins: Vec::new(),
        train_samples: vec![TrainSample {
            indices,
            validation_indices,
        }],
        label_budget: budget,
    };
    reveal_labels(train, &plan, 0, counter)
}
