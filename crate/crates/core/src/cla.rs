//! CLA: clustering by per-feature percentile exceedance, then labeling.
//!
//! Each instance's score `K` counts the features on which it strictly exceeds
//! that feature's C-th percentile. Instances whose `K` is strictly above the
//! median `K` are labeled positive.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};

/// A hard label with a continuous score (higher means more likely positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

/// Linear-interpolation percentile: with the values sorted ascending and
/// `r = c/100 · (n − 1)`, returns `v[⌊r⌋] + frac(r) · (v[⌊r⌋+1] − v[⌊r⌋])`.
pub fn percentile(values: &[f64], c: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("percentile of an empty sequence"));
    }
    if !(0.0..=100.0).contains(&c) {
        return Err(Error::contract(format!("percentile {c} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("percentile of non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, c))
}

/// [`percentile`] over already-sorted, non-empty input.
pub(crate) fn percentile_sorted(sorted: &[f64], c: f64) -> f64 {
    let rank = c / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaCutoffs {
    pub c_percentile: f64,
    pub cutoffs: Vec<f64>,
}

impl ClaCutoffs {
    pub fn n_features(&self) -> usize {
        self.cutoffs.len()
    }
}

/// Per-feature C-th percentile cutoffs over `d`.
pub fn cla_fit(d: &Dataset, c: f64) -> Result<ClaCutoffs> {
    if d.is_empty() {
        return Err(Error::contract("cannot fit CLA cutoffs on an empty dataset"));
    }
    if !(c > 0.0 && c < 100.0) {
        return Err(Error::contract(format!("C percentile {c} outside (0, 100)")));
    }
    let cutoffs = (0..d.n_features())
        .map(|j| percentile(&d.column(j), c))
        .collect::<Result<_>>()?;
    Ok(ClaCutoffs {
        c_percentile: c,
        cutoffs,
    })
}

/// Exceedance counts `K_i = |{j : x_ij > cutoff_j}|`.
pub fn exceedance_counts(cutoffs: &ClaCutoffs, d: &Dataset) -> Result<Vec<usize>> {
    if d.n_features() != cutoffs.n_features() {
        return Err(Error::contract(format!(
            "dataset has {} features, cutoffs have {}",
            d.n_features(),
            cutoffs.n_features()
        )));
    }
    Ok(d
        .rows()
        .map(|row| {
            row.iter()
                .zip(&cutoffs.cutoffs)
                .filter(|(v, cut)| v > cut)
                .count()
        })
        .collect())
}

/// Labels every row of `d`: positive iff its exceedance count is strictly
/// above the median count (50th percentile, same interpolation) over `d`.
pub fn cla_label(cutoffs: &ClaCutoffs, d: &Dataset) -> Result<Vec<Prediction>> {
    let counts = exceedance_counts(cutoffs, d)?;
    if counts.is_empty() {
        return Ok(Vec::new());
    }
    let as_real: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    let median = percentile(&as_real, 50.0)?;
    Ok(as_real
        .into_iter()
        .map(|k| Prediction {
            label: Label::from(k > median),
            score: k,
        })
        .collect())
}

pub fn labels_of(predictions: &[Prediction]) -> Vec<Label> {
    predictions.iter().map(|p| p.label).collect()
}

pub fn scores_of(predictions: &[Prediction]) -> Vec<f64> {
    predictions.iter().map(|p| p.score).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four_rows() -> Dataset {
        Dataset::from_rows(
            vec![
                vec![1.0, 10.0],
                vec![2.0, 20.0],
                vec![3.0, 30.0],
                vec![4.0, 40.0],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0).unwrap(), 2.5);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 75.0).unwrap(), 3.25);
        assert_eq!(percentile(&[7.0], 30.0).unwrap(), 7.0);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 75.0).unwrap(), 3.25);
        assert!(matches!(percentile(&[], 50.0), Err(Error::Contract(_))));
    }

    #[test]
    fn fit_examples() {
        let d = four_rows();
        assert_eq!(cla_fit(&d, 50.0).unwrap().cutoffs, vec![2.5, 25.0]);
        assert_eq!(cla_fit(&d, 75.0).unwrap().cutoffs, vec![3.25, 32.5]);
        let constant = Dataset::from_rows(vec![vec![5.0]; 3], None).unwrap();
        for c in [5.0, 50.0, 95.0] {
            assert_eq!(cla_fit(&constant, c).unwrap().cutoffs, vec![5.0]);
        }
        let empty = Dataset::from_rows(Vec::new(), None).unwrap();
        assert!(cla_fit(&empty, 50.0).is_err());
    }

    #[test]
    fn label_examples() {
        let d = four_rows();
        let at50 = cla_label(&cla_fit(&d, 50.0).unwrap(), &d).unwrap();
        assert_eq!(scores_of(&at50), vec![0.0, 0.0, 2.0, 2.0]);
        assert_eq!(labels_of(&at50), vec![0, 0, 1, 1]);
        let at75 = cla_label(&cla_fit(&d, 75.0).unwrap(), &d).unwrap();
        assert_eq!(scores_of(&at75), vec![0.0, 0.0, 0.0, 2.0]);
        assert_eq!(labels_of(&at75), vec![0, 0, 0, 1]);
    }

    #[test]
    fn identical_rows_are_all_negative() {
        let d = Dataset::from_rows(vec![vec![3.0, -1.0]; 6], None).unwrap();
        let preds = cla_label(&cla_fit(&d, 40.0).unwrap(), &d).unwrap();
        assert!(preds.iter().all(|p| p.label == 0 && p.score == 0.0));
    }

    #[test]
    fn feature_count_mismatch() {
        let d = four_rows();
        let cut = ClaCutoffs {
            c_percentile: 50.0,
            cutoffs: vec![1.0],
        };
        assert!(matches!(cla_label(&cut, &d), Err(Error::Contract(_))));
    }

    #[test]
    fn instance_at_every_cutoff_scores_zero() {
        let cut = ClaCutoffs {
            c_percentile: 50.0,
            cutoffs: vec![1.0, 2.0, 3.0],
        };
        let d = Dataset::from_rows(vec![vec![1.0, 2.0, 3.0]], None).unwrap();
        assert_eq!(exceedance_counts(&cut, &d).unwrap(), vec![0]);
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..20, 1usize..6).prop_flat_map(|(n, m)| {
            prop::collection::vec(prop::collection::vec(-50i32..50, m), n)
                .prop_map(|rows| {
                    rows.into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect()
                })
        })
    }

    proptest! {
        #[test]
        fn shifting_a_column_keeps_labels(rows in matrix(), shift in -100i32..100, c in 1u32..20) {
            let c = f64::from(c * 5);
            let d = Dataset::from_rows(rows.clone(), None).unwrap();
            let shifted_rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|mut r| { r[0] += f64::from(shift); r })
                .collect();
            let s = Dataset::from_rows(shifted_rows, None).unwrap();
            let a = cla_label(&cla_fit(&d, c).unwrap(), &d).unwrap();
            let b = cla_label(&cla_fit(&s, c).unwrap(), &s).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn raising_c_never_raises_counts(rows in matrix(), lo in 1u32..19, step in 1u32..10) {
            let hi = (lo + step).min(19);
            let d = Dataset::from_rows(rows, None).unwrap();
            let k_lo = exceedance_counts(&cla_fit(&d, f64::from(lo * 5)).unwrap(), &d).unwrap();
            let k_hi = exceedance_counts(&cla_fit(&d, f64::from(hi * 5)).unwrap(), &d).unwrap();
            for (a, b) in k_lo.iter().zip(&k_hi) {
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn cutoffs_lie_within_column_range(rows in matrix(), c in 1u32..100) {
            let d = Dataset::from_rows(rows, None).unwrap();
            let cut = cla_fit(&d, f64::from(c)).unwrap();
            for (j, &v) in cut.cutoffs.iter().enumerate() {
                let col = d.column(j);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= min && v <= max);
            }
        }
    }
}
