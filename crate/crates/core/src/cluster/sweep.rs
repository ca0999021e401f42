use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::elbow::detect_elbow;
use super::kmeans::{kmeans_fit, KMeansParams};
use super::silhouette::{silhouette_score, DistanceTable};
use super::ClusterError;

pub const RULE_SILHOUETTE_IN_BAND: &str = "silhouette-argmax-in-elbow-band";
pub const RULE_BAND_ONLY: &str = "elbow-band-lower-bound";
pub const RULE_DEGENERATE: &str = "degenerate-constant-data";

/// Inertia and silhouette for every k of a sweep, plus the chosen k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub k_values: Vec<usize>,
    pub inertias: Vec<f64>,
    /// `None` for k = 1 or when a fit produced a single occupied cluster.
    pub silhouettes: Vec<Option<f64>>,
    pub elbow_band: (usize, usize),
    pub distinct_elbow: bool,
    pub chosen_k: usize,
    pub selection_rule: String,
    /// All rows identical; every k is equivalent.
    pub degenerate: bool,
}

/// Fits every k in `k_min..=k_max`, then picks the silhouette argmax inside the
/// elbow band (ties toward the smaller k).
pub fn sweep_k(
    m: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<KSweepReport, ClusterError> {
    if k_min == 0 || k_min > k_max {
        return Err(ClusterError::InvalidK(k_min));
    }
    if m.n_rows() < k_max {
        return Err(ClusterError::TooFewSamples {
            rows: m.n_rows(),
            k: k_max,
        });
    }
    let k_values: Vec<usize> = (k_min..=k_max).collect();
    let table = (m.n_rows() <= DistanceTable::MAX_ROWS && k_max >= 2).then(|| DistanceTable::new(m));
    let fits = k_values
        .par_iter()
        .map(|&k| {
            let fit = kmeans_fit(m, k, seed, params)?;
            let sil = if k >= 2 {
                let score = match &table {
                    Some(t) => t.score(&fit.labels),
                    None => silhouette_score(m, &fit.labels),
                };
                match score {
                    Ok(s) => Some(s),
                    Err(ClusterError::SingleCluster) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok((fit.inertia, sil))
        })
        .collect::<Result<Vec<_>, ClusterError>>()?;
    let inertias: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let silhouettes: Vec<Option<f64>> = fits.iter().map(|f| f.1).collect();
    let band = detect_elbow(&k_values, &inertias)?;

    let first = m.rows().next();
    let degenerate = first.is_some_and(|f| m.rows().all(|r| r == f));
    let (chosen_k, rule) = if degenerate {
        (k_values[0], RULE_DEGENERATE)
    } else {
        let best = k_values
            .iter()
            .zip(&silhouettes)
            .filter(|(k, s)| band.contains(**k) && s.is_some())
            .map(|(k, s)| (*k, s.unwrap()))
            .fold(None::<(usize, f64)>, |acc, (k, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((k, s)),
            });
        match best {
            Some((k, _)) => (k, RULE_SILHOUETTE_IN_BAND),
            None => (band.lo, RULE_BAND_ONLY),
        }
    };
    Ok(KSweepReport {
        k_values,
        inertias,
        silhouettes,
        elbow_band: (band.lo, band.hi),
        distinct_elbow: band.distinct,
        chosen_k,
        selection_rule: rule.to_string(),
        degenerate,
    })
}
