//! Random forest over entropy-split decision trees.
//!
//! Each tree is grown on a bootstrap sample with a random subset of
//! `⌊log2 m⌋` candidate features per split. Every random draw comes from a
//! per-tree generator derived from the forest seed, so fitting in parallel
//! gives the same model as fitting serially.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cla::Prediction;
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::seed::{self, stream, Rng};

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_split: usize,
    /// Candidate features per split; `None` means `⌊log2 m⌋`, at least 1.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_split: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn features_for(&self, m: usize) -> usize {
        let k = self
            .features_per_split
            .unwrap_or_else(|| (m.max(1) as f64).log2().floor() as usize);
        k.clamp(1, m.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::contract("n_trees must be at least 1"));
        }
        if self.min_split < 2 {
            return Err(Error::contract("min_split must be at least 2"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::contract("max_depth must be positive when set"));
        }
        Ok(())
    }
}

/// Binary entropy in bits of a `(negatives, positives)` count pair.
pub fn entropy(counts: [usize; 2]) -> Result<f64> {
    if counts[0] + counts[1] == 0 {
        return Err(Error::contract("entropy of an empty node"));
    }
    Ok(entropy_of(counts))
}

fn entropy_of(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn class_counts(labels: &[Label], rows: &[usize]) -> [usize; 2] {
    let mut counts = [0; 2];
    for &i in rows {
        counts[labels[i] as usize] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Arena of nodes; the root is node 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, row: &[f64]) -> [usize; 2] {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Leaf majority vote; ties vote positive.
    pub fn vote(&self, row: &[f64]) -> Label {
        let counts = self.leaf_for(row);
        Label::from(counts[1] >= counts[0])
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// A candidate split with its information gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint between two distinct consecutive values, kept strictly below `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best split of `rows` over `features` (scanned in the given order).
///
/// Thresholds are midpoints between consecutive distinct values. Ties in gain
/// keep the first candidate found, so passing features in ascending order
/// prefers the lowest feature index, then the lowest threshold.
pub fn best_split(
    d: &Dataset,
    labels: &[Label],
    rows: &[usize],
    features: &[usize],
) -> Option<Split> {
    let total = class_counts(labels, rows);
    let n = rows.len() as f64;
    let parent = entropy_of(total);
    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, Label)> = Vec::with_capacity(rows.len());
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (d.value(i, f), labels[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for k in 0..pairs.len().saturating_sub(1) {
            left[pairs[k].1 as usize] += 1;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (k + 1) as f64;
            let child = nl / n * entropy_of(left) + (n - nl) / n * entropy_of(right);
            let gain = parent - child;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(pairs[k].0, pairs[k + 1].0),
                    gain,
                });
            }
        }
    }
    best
}

struct Grower<'a> {
    data: &'a Dataset,
    labels: &'a [Label],
    params: &'a ForestParams,
    k: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn candidate_features(&mut self) -> (Vec<usize>, Vec<usize>) {
        let m = self.data.n_features();
        if self.k >= m {
            return ((0..m).collect(), Vec::new());
        }
        let mut chosen = index::sample(&mut self.rng, m, self.k).into_vec();
        chosen.sort_unstable();
        let rest = (0..m).filter(|j| chosen.binary_search(j).is_err()).collect();
        (chosen, rest)
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let counts = class_counts(self.labels, rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < self.params.min_split {
            return id;
        }
        let (chosen, rest) = self.candidate_features();
        let mut split = best_split(self.data, self.labels, rows, &chosen);
        // When the sampled features cannot separate the node, widen to the rest.
        if split.is_none_or(|s| s.gain <= MIN_GAIN) && !rest.is_empty() {
            let wider = best_split(self.data, self.labels, rows, &rest);
            if wider.is_some_and(|w| w.gain > split.map_or(f64::NEG_INFINITY, |s| s.gain)) {
                split = wider;
            }
        }
        let Some(split) = split.filter(|s| s.gain > MIN_GAIN) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.data.value(i, split.feature) <= split.threshold);
        let left = self.grow(&left_rows, depth + 1);
        let right = self.grow(&right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn fit_tree(d: &Dataset, labels: &[Label], params: &ForestParams, tree_seed: u64) -> Tree {
    let mut rng = seed::rng(tree_seed);
    let n = d.n_rows();
    let rows: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower {
        data: d,
        labels,
        params,
        k: params.features_for(d.n_features()),
        rng,
        nodes: Vec::new(),
    };
    grower.grow(&rows, 0);
    Tree {
        nodes: grower.nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub feature_count: usize,
}

impl ForestModel {
    /// Fits a forest on a fully labeled dataset.
    pub fn fit(d: &Dataset, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let labels = d.known_labels()?;
        if d.is_empty() {
            return Err(Error::contract("cannot fit a forest on zero instances"));
        }
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = seed::derive_seed(params.seed, stream::TREE, t as u64);
                fit_tree(d, &labels, params, tree_seed)
            })
            .collect();
        Ok(Self {
            trees,
            feature_count: d.n_features(),
        })
    }

    /// True when every tree is a single leaf voting the same class.
    pub fn is_constant(&self) -> bool {
        let first = self.trees[0].vote(&vec![0.0; self.feature_count]);
        self.trees
            .iter()
            .all(|t| t.nodes.len() == 1 && t.vote(&vec![0.0; self.feature_count]) == first)
    }

    /// Score is the fraction of trees voting positive; label is 1 when at
    /// least half do.
    pub fn predict(&self, d: &Dataset) -> Result<Vec<Prediction>> {
        if d.n_features() != self.feature_count {
            return Err(Error::contract(format!(
                "forest expects {} features, got {}",
                self.feature_count,
                d.n_features()
            )));
        }
        let n_trees = self.trees.len() as f64;
        Ok(d.rows()
            .map(|row| {
                let votes = self.trees.iter().filter(|t| t.vote(row) == 1).count();
                let score = votes as f64 / n_trees;
                Prediction {
                    label: Label::from(score >= 0.5),
                    score,
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_dim() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 1..=50 {
            rows.push(vec![-(i as f64) / 10.0]);
            labels.push(0);
            rows.push(vec![i as f64 / 10.0]);
            labels.push(1);
        }
        Dataset::from_rows(rows, Some(labels)).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy([5, 5]).unwrap(), 1.0);
        assert_eq!(entropy([10, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy([3, 1]).unwrap(), 0.8113, epsilon = 1e-4);
        assert!(entropy([0, 0]).is_err());
    }

    #[test]
    fn one_dimensional_split_at_zero() {
        let d = one_dim();
        let labels = d.known_labels().unwrap();
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let split = best_split(&d, &labels, &rows, &[0]).unwrap();
        assert_abs_diff_eq!(split.threshold, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(split.gain, 1.0, epsilon = 1e-12);

        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let model = ForestModel::fit(&d, &params).unwrap();
        assert_eq!(model.trees[0].nodes.len(), 3);
        let preds = model.predict(&d).unwrap();
        assert!(preds.iter().zip(&labels).all(|(p, &y)| p.label == y));
    }

    #[test]
    fn pure_data_gives_constant_model() {
        let d = Dataset::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]], Some(vec![1, 1, 1]))
            .unwrap();
        let model = ForestModel::fit(&d, &ForestParams { n_trees: 7, ..Default::default() }).unwrap();
        assert!(model.is_constant());
        for p in model.predict(&d).unwrap() {
            assert_eq!((p.label, p.score), (1, 1.0));
        }
    }

    #[test]
    fn single_instance_echoes_label() {
        let d = Dataset::from_rows(vec![vec![4.0, 2.0]], Some(vec![0])).unwrap();
        let model = ForestModel::fit(&d, &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        assert!(model.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(model.predict(&d).unwrap()[0].label, 0);
    }

    #[test]
    fn vote_arithmetic() {
        let leaf = |c: [usize; 2]| Tree {
            nodes: vec![Node::Leaf { counts: c }],
        };
        let model = ForestModel {
            trees: vec![leaf([0, 3]), leaf([1, 2]), leaf([4, 1])],
            feature_count: 1,
        };
        let d = Dataset::from_rows(vec![vec![0.0]], None).unwrap();
        let p = model.predict(&d).unwrap()[0];
        assert_abs_diff_eq!(p.score, 2.0 / 3.0);
        assert_eq!(p.label, 1);

        let tied = ForestModel {
            trees: vec![leaf([0, 3]), leaf([2, 2]), leaf([4, 1]), leaf([5, 0])],
            feature_count: 1,
        };
        let p = tied.predict(&d).unwrap()[0];
        assert_eq!((p.label, p.score), (1, 0.5));
    }

    #[test]
    fn errors() {
        let d = Dataset::new(vec!["a".into()], vec![vec![1.0]], Some(vec![None])).unwrap();
        assert!(ForestModel::fit(&d, &ForestParams::default()).is_err());
        let unlabeled = Dataset::from_rows(vec![vec![1.0]], None).unwrap();
        assert!(ForestModel::fit(&unlabeled, &ForestParams::default()).is_err());
        let ok = Dataset::from_rows(vec![vec![1.0]], Some(vec![1])).unwrap();
        let model = ForestModel::fit(&ok, &ForestParams::default()).unwrap();
        let wide = Dataset::from_rows(vec![vec![1.0, 2.0]], None).unwrap();
        assert!(model.predict(&wide).is_err());
    }

    #[test]
    fn features_per_split_rule() {
        let p = ForestParams::default();
        assert_eq!(p.features_for(1), 1);
        assert_eq!(p.features_for(2), 1);
        assert_eq!(p.features_for(10), 3);
        assert_eq!(p.features_for(64), 6);
    }

    #[test]
    fn json_dump_lists_nodes() {
        let model = ForestModel::fit(
            &one_dim(),
            &ForestParams { n_trees: 1, bootstrap: false, ..Default::default() },
        )
        .unwrap();
        let json = model.to_json().unwrap();
        assert!(json.contains("\"kind\": \"split\""));
        assert!(json.contains("\"kind\": \"leaf\""));
    }

    fn labeled_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>)> {
        (2usize..30, 1usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(-1000.0f64..1000.0, m), n),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn chosen_split_dominates_every_candidate((rows, labels) in labeled_matrix()) {
            let d = Dataset::from_rows(rows, Some(labels.clone())).unwrap();
            let idx: Vec<usize> = (0..d.n_rows()).collect();
            let feats: Vec<usize> = (0..d.n_features()).collect();
            if let Some(best) = best_split(&d, &labels, &idx, &feats) {
                // Independent rescan over every (feature, midpoint) candidate.
                let parent = entropy_of(class_counts(&labels, &idx));
                for f in 0..d.n_features() {
                    let mut vals = d.column(f);
                    vals.sort_by(f64::total_cmp);
                    vals.dedup();
                    for w in vals.windows(2) {
                        let t = midpoint(w[0], w[1]);
                        let (l, r): (Vec<usize>, Vec<usize>) =
                            idx.iter().partition(|&&i| d.value(i, f) <= t);
                        let n = idx.len() as f64;
                        let child = l.len() as f64 / n * entropy_of(class_counts(&labels, &l))
                            + r.len() as f64 / n * entropy_of(class_counts(&labels, &r));
                        prop_assert!(best.gain >= parent - child - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn unlimited_single_tree_fits_training_data((rows, labels) in labeled_matrix()) {
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    prop_assume!(rows[i] != rows[j] || labels[i] == labels[j]);
                }
            }
            let d = Dataset::from_rows(rows, Some(labels.clone())).unwrap();
            let model = ForestModel::fit(
                &d,
                &ForestParams { n_trees: 1, bootstrap: false, ..Default::default() },
            ).unwrap();
            let preds = model.predict(&d).unwrap();
            for (p, y) in preds.iter().zip(&labels) {
                prop_assert_eq!(p.label, *y);
            }
        }

        #[test]
        fn scores_are_vote_fractions((rows, labels) in labeled_matrix(), seed in 0u64..1000) {
            let d = Dataset::from_rows(rows, Some(labels)).unwrap();
            let params = ForestParams { n_trees: 9, seed, ..Default::default() };
            let a = ForestModel::fit(&d, &params).unwrap();
            let b = ForestModel::fit(&d, &params).unwrap();
            prop_assert_eq!(&a, &b);
            for p in a.predict(&d).unwrap() {
                let votes = p.score * 9.0;
                prop_assert!((votes - votes.round()).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&p.score));
            }
        }
    }
}
