use rayon::prelude::*;

use crate::features::FeatureMatrix;

use super::kmeans::{sq_dist, Points};
use super::ClusterError;

/// Mean silhouette coefficient `(b - a) / max(a, b)` over all rows, using
/// Euclidean distance. `a` is the mean distance to the other members of the
/// row's cluster, `b` the smallest mean distance to another cluster's members.
/// Rows in singleton clusters score 0, as do rows with `a = b = 0`.
pub fn silhouette_score(m: &FeatureMatrix, labels: &[usize]) -> Result<f64, ClusterError> {
    let coeffs = silhouette_samples(m, labels)?;
    Ok(coeffs.iter().sum::<f64>() / coeffs.len() as f64)
}

/// Per-row silhouette coefficients.
pub fn silhouette_samples(m: &FeatureMatrix, labels: &[usize]) -> Result<Vec<f64>, ClusterError> {
    let pts = Points::of(m);
    samples_with(pts.len(), labels, |i, j| sq_dist(pts.row(i), pts.row(j)).sqrt())
}

/// Pairwise Euclidean distances kept in memory, for scoring many labelings
/// of the same rows. Scores match [`silhouette_score`] bit for bit.
pub(crate) struct DistanceTable {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceTable {
    /// Rows above which the table is not worth its memory (72 MB).
    pub const MAX_ROWS: usize = 3000;

    pub fn new(m: &FeatureMatrix) -> Self {
        let pts = Points::of(m);
        let n = pts.len();
        let mut dist = vec![0.0; n * n];
        dist.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, d) in row.iter_mut().enumerate() {
                *d = sq_dist(pts.row(i), pts.row(j)).sqrt();
            }
        });
        Self { n, dist }
    }

    pub fn score(&self, labels: &[usize]) -> Result<f64, ClusterError> {
        let coeffs = samples_with(self.n, labels, |i, j| self.dist[i * self.n + j])?;
        Ok(coeffs.iter().sum::<f64>() / coeffs.len() as f64)
    }
}

fn samples_with(
    n: usize,
    labels: &[usize],
    dist: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<Vec<f64>, ClusterError> {
    if labels.len() != n {
        return Err(ClusterError::LengthMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let k = labels.iter().copied().max().map_or(0, |l| l + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if counts[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &l) in labels.iter().enumerate() {
                if j != i {
                    sums[l] += dist(i, j);
                }
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect())
}
