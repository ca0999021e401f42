//! Principal component projection for two-dimensional state plots.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::seed;

const TOLERANCE: f64 = 1e-10;
const MAX_ITER: usize = 10_000;
/// Each iteration multiplies by `A^(2^SQUARINGS)`.
const SQUARINGS: u32 = 6;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("{rows} rows cannot support {components} components")]
    TooFewRows { rows: usize, components: usize },
    #[error("{components} components requested from {features} features")]
    InvalidComponents { components: usize, features: usize },
    #[error("features do not match the model: {0}")]
    FeatureMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<String>,
    pub mean_vector: Vec<f64>,
    /// Row-orthonormal, one row per component.
    pub components: Vec<Vec<f64>>,
    /// Non-increasing.
    pub explained_variance: Vec<f64>,
    /// Fewer nonzero eigenvalues than components; the tail rows are an
    /// arbitrary orthonormal completion.
    pub rank_deficient: bool,
}

/// Sample covariance (1/(N-1)) of the rows of `m`, with the column means.
pub fn covariance(m: &FeatureMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (rows, n) = (m.n_rows(), m.n_features());
    let mut mean = vec![0.0; n];
    for r in m.rows() {
        for (acc, v) in mean.iter_mut().zip(r) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= rows as f64);
    let mut cov = vec![vec![0.0; n]; n];
    for r in m.rows() {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, mu)| v - mu).collect();
        for i in 0..n {
            for j in i..n {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let denom = (rows.max(2) - 1) as f64;
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

pub fn pca_fit(m: &FeatureMatrix, components: usize) -> Result<PcaModel, PcaError> {
    let n = m.n_features();
    if components == 0 || components > n {
        return Err(PcaError::InvalidComponents { components, features: n });
    }
    if m.n_rows() <= components {
        return Err(PcaError::TooFewRows { rows: m.n_rows(), components });
    }
    let (mean, cov) = covariance(m);
    let (vectors, values) = top_eigenpairs(&cov, components);
    let scale = values.first().copied().unwrap_or(0.0).max(trace(&cov));
    let rank_deficient = values.iter().any(|&v| v <= TOLERANCE * scale.max(f64::MIN_POSITIVE));
    if rank_deficient {
        log::warn!("covariance has fewer than {components} nonzero eigenvalues");
    }
    Ok(PcaModel {
        feature_names: m.feature_names().to_vec(),
        mean_vector: mean,
        components: vectors,
        explained_variance: values,
        rank_deficient,
    })
}

/// Top `c` eigenpairs of a symmetric positive semi-definite matrix by power
/// iteration with deflation.
pub fn top_eigenpairs(a: &[Vec<f64>], c: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = a.len();
    let mut deflated = a.to_vec();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut values: Vec<f64> = Vec::with_capacity(c);
    let residual_scale = frobenius(a).max(f64::MIN_POSITIVE);
    for j in 0..c {
        let power = matrix_power(&deflated);
        let mut rng = seed::rng(0x5ca1ab1e, &[j as u64]);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthonormalize(&mut v, &vectors, j);
        for _ in 0..MAX_ITER {
            let mut next = mat_vec(&power, &v);
            if !orthonormalize(&mut next, &vectors, j) {
                break;
            }
            v = next;
            let av = mat_vec(&deflated, &v);
            let lambda = dot(&v, &av);
            let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
            if res <= TOLERANCE * residual_scale {
                break;
            }
        }
        let lambda = dot(&v, &mat_vec(&deflated, &v));
        let lambda = match values.last() {
            Some(&prev) => lambda.clamp(0.0, prev),
            None => lambda.max(0.0),
        };
        fix_sign(&mut v);
        for (r, row) in deflated.iter_mut().enumerate() {
            for (s, x) in row.iter_mut().enumerate() {
                *x -= lambda * v[r] * v[s];
            }
        }
        vectors.push(v);
        values.push(lambda);
    }
    (vectors, values)
}

/// Gram-Schmidt against `basis` (twice, for stability) and normalize. If the
/// vector collapses, substitutes the first basis axis that survives.
fn orthonormalize(v: &mut Vec<f64>, basis: &[Vec<f64>], salt: usize) -> bool {
    let attempt = |v: &mut Vec<f64>| {
        for _ in 0..2 {
            for b in basis {
                let p = dot(v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = dot(v, v).sqrt();
        if norm > 1e-300 && norm.is_finite() {
            v.iter_mut().for_each(|x| *x /= norm);
            true
        } else {
            false
        }
    };
    if attempt(v) {
        return true;
    }
    let n = v.len();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[(i + salt) % n] = 1.0;
        if attempt(&mut e) {
            *v = e;
            return false;
        }
    }
    false
}

/// Largest-magnitude entry positive; the first index wins magnitude ties.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn matrix_power(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p = a.to_vec();
    for _ in 0..SQUARINGS {
        let norm = frobenius(&p);
        if !(norm > 0.0) {
            break;
        }
        p.iter_mut().flatten().for_each(|x| *x /= norm);
        p = mat_mul(&p, &p);
    }
    p
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

fn trace(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// `(x - mean) * components^T` for every row.
    pub fn project(&self, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, PcaError> {
        if m.n_features() != self.mean_vector.len() {
            return Err(PcaError::FeatureMismatch(format!(
                "model has {} features, input has {}",
                self.mean_vector.len(),
                m.n_features()
            )));
        }
        if m.feature_names() != self.feature_names.as_slice() {
            return Err(PcaError::FeatureMismatch(format!(
                "model features {:?}, input {:?}",
                self.feature_names,
                m.feature_names()
            )));
        }
        Ok((0..m.n_rows())
            .into_par_iter()
            .map(|i| self.project_row(m.row(i)))
            .collect())
    }

    pub fn project_row(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean_vector).map(|(v, mu)| v - mu).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }
}

pub fn project(model: &PcaModel, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, PcaError> {
    model.project(m)
}
