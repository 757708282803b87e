//! Mantel test between two distance matrices on the same specimens.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::matrix::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MantelResult {
    /// Pearson correlation of the strict upper triangles.
    pub r: f64,
    /// `(1 + #{r_perm ≥ r}) / (permutations + 1)`.
    pub significance: f64,
    pub permutations: usize,
    pub seed: u64,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn upper_permuted(values: &[f64], n: usize, p: &[usize]) -> Vec<f64> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| values[p[i] * n + p[j]]).collect()
}

/// Mantel statistic and one-sided significance under joint row/column
/// permutations of `d2`, given an explicit permutation sequence.
pub(crate) fn mantel_with(d1: &DistanceMatrix, d2: &DistanceMatrix, perms: impl Iterator<Item = Vec<usize>>) -> Result<(f64, usize, usize)> {
    let d2 = d2.aligned_to(d1.ids())?;
    let n = d1.len();
    if n < 3 {
        return Err(Error::InvalidArgument("the Mantel test needs at least three specimens".into()));
    }
    if !(d1.is_complete() && d2.is_complete()) {
        return Err(Error::InvalidArgument("matrices have failed pairs".into()));
    }
    let x = d1.upper_triangle();
    let y = d2.upper_triangle();
    let r = pearson(&x, &y).ok_or_else(|| Error::Degenerate("constant distance matrix; correlation undefined".into()))?;
    let (mut count, mut total) = (0, 0);
    for p in perms {
        let yp = upper_permuted(d2.values(), n, &p);
        if pearson(&x, &yp).expect("permutation keeps the variance") >= r {
            count += 1;
        }
        total += 1;
    }
    Ok((r, count, total))
}

/// Mantel test of `d1` against `d2` (aligned by id), permuting `d2`.
pub fn mantel(d1: &DistanceMatrix, d2: &DistanceMatrix, permutations: usize, seed: u64) -> Result<MantelResult> {
    if permutations < 99 {
        return Err(Error::InvalidArgument("at least 99 permutations are required".into()));
    }
    let n = d1.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms = (0..permutations).map(|_| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut rng);
        p
    });
    let (r, count, total) = mantel_with(d1, d2, perms)?;
    Ok(MantelResult { r, significance: (1 + count) as f64 / (total + 1) as f64, permutations, seed })
}
