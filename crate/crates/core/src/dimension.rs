//! Correlation-sum intrinsic dimensionality.
//!
//! `C(r)` is the fraction of unordered point pairs closer than `r` (strict).
//! The dimension estimate is the largest slope of `ln C(r)` against `ln r`
//! between consecutive radii on a log-spaced grid.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionOptions {
    pub n_radii: usize,
    /// Min-max scale each feature to [0, 1] before measuring distances.
    pub normalize: bool,
    /// Radii whose pair count falls below this are left out of the slope
    /// search; `None` uses the number of points. `Some(1)` keeps every radius
    /// with a non-zero correlation sum.
    pub min_pairs: Option<u64>,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        Self {
            n_radii: 20,
            normalize: true,
            min_pairs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimProfile {
    pub radii: Vec<f64>,
    pub correlation_sums: Vec<f64>,
    pub pair_counts: Vec<u64>,
    pub dimension: f64,
    pub n_points: usize,
    /// All points coincide; the profile is empty and the dimension is 0.
    pub degenerate: bool,
}

/// Per-feature min-max scaling; constant features map to 0.
pub fn min_max_normalize(d: &Dataset) -> Vec<Vec<f64>> {
    let m = d.n_features();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in d.rows() {
        for j in 0..m {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    d.rows()
        .map(|row| {
            (0..m)
                .map(|j| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        (row[j] - lo[j]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn points(d: &Dataset, normalize: bool) -> Vec<Vec<f64>> {
    if normalize {
        min_max_normalize(d)
    } else {
        d.rows().map(<[f64]>::to_vec).collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fraction of unordered pairs at Euclidean distance strictly below `r`.
pub fn correlation_sum(d: &Dataset, r: f64, normalize: bool) -> Result<f64> {
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::contract("correlation sum needs at least two points"));
    }
    if r.is_nan() || r <= 0.0 {
        return Err(Error::contract(format!("radius {r} must be positive")));
    }
    let pts = points(d, normalize);
    let count: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| distance(&pts[i], &pts[j]) < r)
                .count() as u64
        })
        .sum();
    Ok(count as f64 / pair_total(n) as f64)
}

fn pair_total(n: usize) -> u64 {
    (n as u64) * (n as u64 - 1) / 2
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Largest finite-difference slope of `ln C` against `ln r` over consecutive
/// radii whose pair counts both reach `min_pairs` (and are non-zero).
pub fn max_log_slope(radii: &[f64], sums: &[f64], counts: &[u64], min_pairs: u64) -> f64 {
    let floor = min_pairs.max(1);
    (1..radii.len())
        .filter(|&k| counts[k - 1] >= floor && counts[k] >= floor)
        .map(|k| (sums[k].ln() - sums[k - 1].ln()) / (radii[k].ln() - radii[k - 1].ln()))
        .fold(0.0, f64::max)
}

/// Correlation-sum profile and dimension estimate.
///
/// The radius grid runs from the smallest non-zero to the largest pairwise
/// distance. Pair counts for every radius are accumulated in one pass over
/// the pairs, in parallel over rows.
pub fn estimate_dimension(d: &Dataset, opts: &DimensionOptions) -> Result<DimProfile> {
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::contract("dimension estimate needs at least two points"));
    }
    if opts.n_radii < 2 {
        return Err(Error::contract("at least two radii are needed"));
    }
    let pts = points(d, opts.normalize);

    let (min_nz, max_d) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for j in (i + 1)..n {
                let dist = distance(&pts[i], &pts[j]);
                if dist > 0.0 {
                    lo = lo.min(dist);
                }
                hi = hi.max(dist);
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));

    let degenerate = DimProfile {
        radii: Vec::new(),
        correlation_sums: Vec::new(),
        pair_counts: Vec::new(),
        dimension: 0.0,
        n_points: n,
        degenerate: true,
    };
    if max_d == 0.0 {
        return Ok(degenerate);
    }
    if min_nz >= max_d {
        // A single distinct non-zero distance: C jumps once, no slope to fit.
        return Ok(DimProfile {
            degenerate: false,
            ..degenerate
        });
    }

    let radii = log_spaced(min_nz, max_d, opts.n_radii);
    // hist[k] counts pairs whose first radius strictly above the distance is radii[k].
    let hist: Vec<u64> = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; radii.len()],
            |mut acc, i| {
                for j in (i + 1)..n {
                    let dist = distance(&pts[i], &pts[j]);
                    let k = radii.partition_point(|&r| r <= dist);
                    if k < radii.len() {
                        acc[k] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; radii.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let pair_counts: Vec<u64> = hist
        .iter()
        .scan(0u64, |acc, &h| {
            *acc += h;
            Some(*acc)
        })
        .collect();
    let total = pair_total(n) as f64;
    let correlation_sums: Vec<f64> = pair_counts.iter().map(|&c| c as f64 / total).collect();
    let min_pairs = opts.min_pairs.unwrap_or(n as u64);
    let dimension = max_log_slope(&radii, &correlation_sums, &pair_counts, min_pairs);
    Ok(DimProfile {
        radii,
        correlation_sums,
        pair_counts,
        dimension,
        n_points: n,
        degenerate: false,
    })
}

/// Writes `r,C(r)` rows followed by a `# D=…` summary line.
pub fn write_profile_csv<W: Write>(profile: &DimProfile, mut w: W) -> Result<()> {
    let io = |e| Error::io("<profile writer>", e);
    writeln!(w, "r,C(r)").map_err(io)?;
    for (r, c) in profile.radii.iter().zip(&profile.correlation_sums) {
        writeln!(w, "{r},{c}").map_err(io)?;
    }
    writeln!(
        w,
        "# D={},n={},degenerate={}",
        profile.dimension, profile.n_points, profile.degenerate
    )
    .map_err(io)?;
    Ok(())
}
