use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{conform, FeatureMatrix, Scaling};

use super::kmeans::{kmeans_fit, KMeansModel, KMeansParams};
use super::silhouette::silhouette_score;
use super::sweep::KSweepReport;
use super::ClusterError;

pub const STATE_MODEL_FORMAT: &str = "powerstate.state-model";
pub const STATE_MODEL_VERSION: u32 = 1;

/// State label per timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StateAssignment {
    pub timestamps: Vec<i64>,
    pub labels: Vec<usize>,
}

impl StateAssignment {
    pub fn new(timestamps: Vec<i64>, labels: Vec<usize>) -> Self {
        debug_assert_eq!(timestamps.len(), labels.len());
        Self { timestamps, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn distinct_states(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Count per label, for labels `0..k`.
    pub fn populations(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0; k.max(self.labels.iter().max().map_or(0, |m| m + 1))];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }
}

/// How the number of states is decided.
#[derive(Debug, Clone, Copy)]
pub enum KSelection<'a> {
    Sweep(&'a KSweepReport),
    Explicit(usize),
}

/// A fitted state function: nearest centroid, then population-ordered label.
#[derive(Debug, Clone, PartialEq)]
pub struct StateModel {
    pub kmeans: KMeansModel,
    pub feature_names: Vec<String>,
    /// Applied to incoming features before distance computation.
    pub scaling: Option<Scaling>,
    /// `[start, end)` epoch milliseconds of the training rows.
    pub training_window: (i64, i64),
    /// `relabel_map[raw centroid] = state label`; label 0 is the most populous.
    pub relabel_map: Vec<usize>,
    /// Training rows per state label.
    pub populations: Vec<usize>,
    pub silhouette: Option<f64>,
}

/// Fits K-Means with the selected k and orders labels by descending training
/// population (ties toward the lower raw index).
pub fn fit_state_model(
    m: &FeatureMatrix,
    selection: KSelection<'_>,
    seed: u64,
    params: &KMeansParams,
) -> Result<StateModel, ClusterError> {
    let k = match selection {
        KSelection::Sweep(r) => r.chosen_k,
        KSelection::Explicit(k) => k,
    };
    let kmeans = kmeans_fit(m, k, seed, params)?;
    let sizes = kmeans.cluster_sizes();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut relabel_map = vec![0; k];
    for (label, &raw) in order.iter().enumerate() {
        relabel_map[raw] = label;
    }
    let populations = order.iter().map(|&raw| sizes[raw]).collect();
    let silhouette = if k >= 2 {
        silhouette_score(m, &kmeans.labels).ok()
    } else {
        None
    };
    let training_window = match (m.timestamps().first(), m.timestamps().last()) {
        (Some(&a), Some(&b)) => (a, b + 1),
        _ => (0, 0),
    };
    Ok(StateModel {
        kmeans,
        feature_names: m.feature_names().to_vec(),
        scaling: m.scaling().cloned(),
        training_window,
        relabel_map,
        populations,
        silhouette,
    })
}

impl StateModel {
    pub fn k(&self) -> usize {
        self.kmeans.k
    }

    /// Brings `m` into the model's feature space, applying stored scaling to
    /// raw input.
    pub fn prepare(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ClusterError> {
        conform(m, &self.feature_names, self.scaling.as_ref())
            .map_err(|e| ClusterError::FeatureMismatch(e.to_string()))
    }

    /// State label of one point already in model space.
    pub fn label_of(&self, x: &[f64]) -> usize {
        self.relabel_map[self.kmeans.nearest(x)]
    }

    /// Centroid of a state label, in model space.
    pub fn centroid_of(&self, label: usize) -> &[f64] {
        let raw = self
            .relabel_map
            .iter()
            .position(|&l| l == label)
            .expect("label < k");
        &self.kmeans.centroids[raw]
    }

    pub fn to_json(&self, metadata: &BTreeMap<String, String>) -> String {
        let doc = StateModelDoc {
            format: STATE_MODEL_FORMAT.to_string(),
            version: STATE_MODEL_VERSION,
            k: self.kmeans.k,
            feature_names: self.feature_names.clone(),
            scaling: self.scaling.clone(),
            centroids: self.kmeans.centroids.clone(),
            relabel_map: self.relabel_map.clone(),
            populations: self.populations.clone(),
            training_window: self.training_window,
            seed: self.kmeans.seed,
            restarts: self.kmeans.restarts,
            inertia: self.kmeans.inertia,
            iterations_run: self.kmeans.iterations_run,
            converged: self.kmeans.converged,
            silhouette: self.silhouette,
            metadata: metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<(Self, BTreeMap<String, String>), ClusterError> {
        let doc: StateModelDoc =
            serde_json::from_str(text).map_err(|e| ClusterError::Format(e.to_string()))?;
        if doc.format != STATE_MODEL_FORMAT || doc.version != STATE_MODEL_VERSION {
            return Err(ClusterError::Format(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        let mut sorted = doc.relabel_map.clone();
        sorted.sort_unstable();
        if doc.centroids.len() != doc.k
            || sorted != (0..doc.k).collect::<Vec<_>>()
            || doc.centroids.iter().any(|c| c.len() != doc.feature_names.len())
        {
            return Err(ClusterError::Format("inconsistent state model".into()));
        }
        let model = StateModel {
            kmeans: KMeansModel {
                k: doc.k,
                centroids: doc.centroids,
                inertia: doc.inertia,
                iterations_run: doc.iterations_run,
                converged: doc.converged,
                seed: doc.seed,
                restarts: doc.restarts,
                labels: Vec::new(),
            },
            feature_names: doc.feature_names,
            scaling: doc.scaling,
            training_window: doc.training_window,
            relabel_map: doc.relabel_map,
            populations: doc.populations,
            silhouette: doc.silhouette,
        };
        Ok((model, doc.metadata))
    }
}

#[derive(Serialize, Deserialize)]
struct StateModelDoc {
    format: String,
    version: u32,
    k: usize,
    feature_names: Vec<String>,
    scaling: Option<Scaling>,
    /// Row per raw centroid index.
    centroids: Vec<Vec<f64>>,
    relabel_map: Vec<usize>,
    populations: Vec<usize>,
    training_window: (i64, i64),
    seed: u64,
    restarts: usize,
    inertia: f64,
    iterations_run: usize,
    converged: bool,
    silhouette: Option<f64>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Labels every row of `m` with its nearest centroid's state label; ties go to
/// the lower raw centroid index.
pub fn assign_nearest(model: &StateModel, m: &FeatureMatrix) -> Result<StateAssignment, ClusterError> {
    let prepared = model.prepare(m)?;
    let labels = prepared.rows().map(|r| model.label_of(r)).collect();
    Ok(StateAssignment::new(m.timestamps().to_vec(), labels))
}
