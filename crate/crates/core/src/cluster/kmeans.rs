//! Lloyd's K-Means with greedy k-means++ seeding and best-of-R restarts.
//!
//! Squared Euclidean distance throughout. Assignment ties go to the lower
//! centroid index. A run stops when an assignment pass leaves every label
//! unchanged and the preceding centroid shift was below `tol`, which makes the
//! result an exact fixed point: every centroid is the mean of its members and
//! every point sits with its nearest centroid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::seed;

use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    /// `k` rows of feature-space coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub seed: u64,
    pub restarts: usize,
    /// Training assignment of the winning run.
    #[serde(skip)]
    pub labels: Vec<usize>,
}

impl KMeansModel {
    /// Members per centroid in the training assignment.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(x, self.centroids.iter().map(Vec::as_slice)).0
    }
}

/// Squared Euclidean distance, summed in four interleaved lanes so the
/// compiler can vectorize it. Symmetric in its arguments.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            lanes[l] += d * d;
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// [`sq_dist`] that may stop once the running sum exceeds `cap`. The result
/// is exact whenever it is `<= cap`; otherwise it is some value `> cap`.
/// Partial sums of non-negative terms never decrease, so stopping early
/// cannot hide a distance at or below the cap.
#[inline]
fn sq_dist_capped(a: &[f64], b: &[f64], cap: f64) -> f64 {
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (i, (x, y)) in ca.zip(cb).enumerate() {
        for l in 0..4 {
            let d = x[l] - y[l];
            lanes[l] += d * d;
        }
        if i % 2 == 1 {
            let partial = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
            if partial > cap {
                return partial;
            }
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

fn nearest<'a>(x: &[f64], centroids: impl Iterator<Item = &'a [f64]>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.enumerate() {
        let d = sq_dist_capped(x, c, best.1);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Same answer as [`nearest`] (lowest index among the closest), but starts
/// from `hint` so that the other distances can usually stop early.
fn nearest_from(x: &[f64], centroids: &[f64], dim: usize, hint: usize) -> usize {
    let row = |j: usize| &centroids[j * dim..(j + 1) * dim];
    let k = centroids.len() / dim.max(1);
    let mut best = (hint, sq_dist(x, row(hint)));
    for j in (0..k).filter(|&j| j != hint) {
        let d = sq_dist_capped(x, row(j), best.1);
        if d < best.1 || (d == best.1 && j < best.0) {
            best = (j, d);
        }
    }
    best.0
}

/// Flat view over row-major data.
#[derive(Clone, Copy)]
pub(crate) struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Points<'a> {
    pub fn of(m: &'a FeatureMatrix) -> Self {
        Self {
            data: m.values(),
            dim: m.n_features(),
        }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

struct Run {
    centroids: Vec<f64>,
    labels: Vec<usize>,
    inertia: f64,
    iterations: usize,
    converged: bool,
}

/// Fits `k` clusters; returns the lowest-inertia run of `params.restarts`,
/// ties resolved toward the lower restart index. Deterministic for fixed
/// `(data, k, seed, params)` regardless of thread scheduling.
pub fn kmeans_fit(
    m: &FeatureMatrix,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<KMeansModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidK(k));
    }
    if m.n_rows() < k {
        return Err(ClusterError::TooFewSamples {
            rows: m.n_rows(),
            k,
        });
    }
    let pts = Points::of(m);
    let restarts = params.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, &[k as u64, r as u64]);
            let init = greedy_kmeanspp(pts, k, &mut rng);
            lloyd(pts, k, init, params)
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    Ok(KMeansModel {
        k,
        centroids: best.centroids.chunks(pts.dim.max(1)).map(<[f64]>::to_vec).collect(),
        inertia: best.inertia,
        iterations_run: best.iterations,
        converged: best.converged,
        seed,
        restarts,
        labels: best.labels,
    })
}

/// k-means++ seeding that, at each step, samples `2 + ln k` candidates with
/// probability proportional to squared distance and keeps the one that lowers
/// the total potential most.
fn greedy_kmeanspp(pts: Points<'_>, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = pts.len();
    let dim = pts.dim;
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(pts.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(pts.row(i), pts.row(first))).collect();

    for _ in 1..k {
        let potential: f64 = closest.iter().sum();
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if potential > 0.0 {
                sample_weighted(&closest, potential, rng)
            } else {
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = closest
                .iter()
                .enumerate()
                .map(|(i, &d)| d.min(sq_dist_capped(pts.row(i), pts.row(cand), d)))
                .collect();
            let pot: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| pot < b.1) {
                best = Some((cand, pot, updated));
            }
        }
        let (cand, _, updated) = best.expect("trials >= 2");
        centroids.extend_from_slice(pts.row(cand));
        closest = updated;
    }
    centroids
}

fn sample_weighted(weights: &[f64], total: f64, rng: &mut impl Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

fn assign(pts: Points<'_>, centroids: &[f64], labels: &mut [usize]) {
    let dim = pts.dim;
    let k = centroids.len() / dim.max(1);
    labels.par_iter_mut().enumerate().for_each(|(i, l)| {
        *l = nearest_from(pts.row(i), centroids, dim, (*l).min(k - 1));
    });
}

/// Member means, computed relative to the first member so that clusters of
/// identical points reproduce the point exactly. Empty clusters are reseeded
/// at the points farthest from their current centroid.
fn update(pts: Points<'_>, k: usize, labels: &[usize], old: &[f64]) -> Vec<f64> {
    let dim = pts.dim;
    let mut anchor: Vec<Option<usize>> = vec![None; k];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let a = *anchor[l].get_or_insert(i);
        let (x, r) = (pts.row(i), pts.row(a));
        for d in 0..dim {
            sums[l * dim + d] += x[d] - r[d];
        }
        counts[l] += 1;
    }
    let mut out = vec![0.0; k * dim];
    for j in 0..k {
        if let Some(a) = anchor[j] {
            let r = pts.row(a);
            for d in 0..dim {
                out[j * dim + d] = r[d] + sums[j * dim + d] / counts[j] as f64;
            }
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<(usize, f64)> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, sq_dist(pts.row(i), &old[l * dim..(l + 1) * dim])))
            .collect();
        far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (j, (i, _)) in empty.into_iter().zip(far) {
            out[j * dim..(j + 1) * dim].copy_from_slice(pts.row(i));
        }
    }
    out
}

fn lloyd(pts: Points<'_>, k: usize, mut centroids: Vec<f64>, params: &KMeansParams) -> Run {
    let n = pts.len();
    let dim = pts.dim;
    let mut labels = vec![0usize; n];
    assign(pts, &centroids, &mut labels);
    let mut next = labels.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        let updated = update(pts, k, &labels, &centroids);
        let shift = updated
            .chunks(dim.max(1))
            .zip(centroids.chunks(dim.max(1)))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        assign(pts, &centroids, &mut next);
        let changed = next != labels;
        std::mem::swap(&mut labels, &mut next);
        if !changed && shift < params.tol {
            converged = true;
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| {
            let l = labels[i];
            sq_dist(pts.row(i), &centroids[l * dim..(l + 1) * dim])
        })
        .sum();
    Run {
        centroids,
        labels,
        inertia,
        iterations,
        converged,
    }
}

/// Sum of squared deviations from the column means.
pub fn total_sse(m: &FeatureMatrix) -> f64 {
    let n = m.n_rows();
    if n == 0 {
        return 0.0;
    }
    let dim = m.n_features();
    let mut mean = vec![0.0; dim];
    for r in m.rows() {
        for (s, v) in mean.iter_mut().zip(r) {
            *s += v;
        }
    }
    mean.iter_mut().for_each(|s| *s /= n as f64);
    m.rows().map(|r| sq_dist(r, &mean)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let m = matrix(&[vec![0.0], vec![2.0]]);
        let fit = kmeans_fit(&m, 1, 7, &KMeansParams::default()).unwrap();
        assert_eq!(fit.centroids, vec![vec![1.0]]);
        assert_eq!(fit.inertia, 2.0);
        assert!(fit.converged);
    }

    #[test]
    fn k_equal_rows_has_zero_inertia() {
        let m = matrix(&[vec![0.0, 1.0], vec![3.0, -1.0], vec![5.0, 5.0], vec![0.5, 0.5]]);
        let fit = kmeans_fit(&m, 4, 1, &KMeansParams::default()).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn too_few_samples() {
        let m = matrix(&[vec![0.0]]);
        assert!(matches!(
            kmeans_fit(&m, 2, 0, &KMeansParams::default()),
            Err(ClusterError::TooFewSamples { rows: 1, k: 2 })
        ));
        assert!(matches!(
            kmeans_fit(&m, 0, 0, &KMeansParams::default()),
            Err(ClusterError::InvalidK(0))
        ));
    }

    #[test]
    fn recovers_two_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let centers = [[0.0, 0.0], [10.0, 0.0]];
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let c = centers[i % 2];
                vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]
            })
            .collect();
        let fit = kmeans_fit(&matrix(&rows), 2, 11, &KMeansParams::default()).unwrap();
        for c in &centers {
            let d = fit
                .centroids
                .iter()
                .map(|x| sq_dist(x, c).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 0.1, "centroid off by {d}");
        }
    }

    #[test]
    fn identical_points_give_exact_zero_inertia() {
        let m = matrix(&vec![vec![0.1, 0.7]; 30]);
        for k in 1..=5 {
            let fit = kmeans_fit(&m, k, 5, &KMeansParams::default()).unwrap();
            assert_eq!(fit.inertia, 0.0, "k={k}");
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let m = matrix(&rows);
        let a = kmeans_fit(&m, 5, 99, &KMeansParams::default()).unwrap();
        let b = kmeans_fit(&m, 5, 99, &KMeansParams::default()).unwrap();
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn empty_cluster_reseeded() {
        let pts = [0.0, 0.0, 10.0, 10.0];
        let p = Points { data: &pts, dim: 1 };
        // Both points labeled 0; cluster 1 is empty and takes the farthest point.
        let out = update(p, 2, &[0, 0, 0, 0], &[0.0, 100.0]);
        assert_eq!(out, vec![5.0, 10.0]);
    }
}
