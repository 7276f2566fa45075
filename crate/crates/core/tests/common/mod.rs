//! Brute-force reference implementations and data generators shared by the
//! integration tests. The oracles favor the most literal formulation over
//! speed and never call into the crate's own helpers.

#![allow(dead_code, clippy::needless_range_loop)]

use frugal::{Dataset, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The k-th smallest value (0-based), found by counting rather than sorting.
fn order_statistic(values: &[f64], k: usize) -> f64 {
    for &v in values {
        let below = values.iter().filter(|&&x| x < v).count();
        let at_most = values.iter().filter(|&&x| x <= v).count();
        if below <= k && k < at_most {
            return v;
        }
    }
    unreachable!("order statistic {k} of {} values", values.len())
}

pub fn percentile(values: &[f64], c: f64) -> f64 {
    let rank = c / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let a = order_statistic(values, lo);
    if frac == 0.0 {
        return a;
    }
    let b = order_statistic(values, lo + 1);
    a + frac * (b - a)
}

/// Violation counts under the proneness rule: above the cutoff with label 0,
/// or at/below it with label 1.
pub fn violation_scores(rows: &[Vec<f64>], labels: &[Label], cutoffs: &[f64]) -> Vec<usize> {
    (0..cutoffs.len())
        .map(|j| {
            let mut count = 0;
            for i in 0..rows.len() {
                let above = rows[i][j] > cutoffs[j];
                if (above && labels[i] == 0) || (!above && labels[i] == 1) {
                    count += 1;
                }
            }
            count
        })
        .collect()
}

pub fn normalize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..m {
        let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for (o, r) in out.iter_mut().zip(rows) {
            o[j] = if hi > lo { (r[j] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    out
}

/// Ordered-pair count over `n(n−1)`, i.e. the textbook double sum.
pub fn correlation_sum(rows: &[Vec<f64>], r: f64, normalized: bool) -> f64 {
    let pts = if normalized { normalize(rows) } else { rows.to_vec() };
    let n = pts.len();
    let mut hits = 0u64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut sq = 0.0;
            for k in 0..pts[i].len() {
                sq += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
            }
            if sq.sqrt() < r {
                hits += 1;
            }
        }
    }
    hits as f64 / (n as f64 * (n - 1) as f64)
}

/// (tp, fp, tn, fn)
pub fn confusion(predicted: &[Label], truth: &[Label]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.0 += 1,
            (1, 0) => c.1 += 1,
            (0, 0) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    c
}

/// Fraction of (positive, negative) pairs ranked correctly, ties worth half.
pub fn auc(scores: &[f64], truth: &[Label]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if truth[i] == 1 && truth[j] == 0 {
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Values from a small grid so ties are common.
pub fn tie_heavy(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        f64::from(rng.gen_range(-3i32..=3))
    } else {
        rng.gen_range(-5.0..5.0)
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| tie_heavy(rng)).collect()).collect()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    (0..n).map(|_| rng.gen_range(0..=1)).collect()
}

/// Points `t · u` for `t ~ U[0, 1]` in a random `k`-dimensional subspace of
/// `R^ambient`, shifted by a random offset.
pub fn flat_manifold(n: usize, k: usize, ambient: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..ambient).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let offset: Vec<f64> = (0..ambient).map(|_| r.gen_range(-5.0..5.0)).collect();
    let rows = (0..n)
        .map(|_| {
            let t: Vec<f64> = (0..k).map(|_| r.gen::<f64>()).collect();
            (0..ambient)
                .map(|a| offset[a] + (0..k).map(|b| t[b] * basis[b][a]).sum::<f64>())
                .collect()
        })
        .collect();
    Dataset::from_rows(rows, None).unwrap()
}

/// Two isotropic unit-variance Gaussian blobs in 2-D whose means sit `margin`
/// standard deviations either side of the line x = 0.
pub fn two_blobs(per_class: usize, margin: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (label, cx) in [(0u8, -margin), (1u8, margin)] {
        for _ in 0..per_class {
            rows.push(vec![cx + unit.sample(&mut r), unit.sample(&mut r)]);
            labels.push(label);
        }
    }
    Dataset::from_rows(rows, Some(labels)).unwrap()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
