use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::StateAssignment;
use crate::features::{conform, FeatureMatrix, Scaling};
use crate::seed;

use super::tree::{argmax_lowest, DecisionTree, Samples, TreeConfig};
use super::ClassifyError;

pub const FOREST_FORMAT: &str = "powerstate.forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means `ceil(sqrt(n_features))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub scaling: Option<Scaling>,
    pub params: ForestParams,
    /// Resolved per-split feature count.
    pub max_features: usize,
    pub seed: u64,
}

/// Trains one tree per bootstrap sample (N draws with replacement). Each
/// tree's RNG derives from `(seed, tree index)`, so the forest does not depend
/// on thread scheduling.
pub fn train_forest(
    m: &FeatureMatrix,
    labels: &StateAssignment,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ClassifyError> {
    if labels.len() != m.n_rows() {
        return Err(ClassifyError::LengthMismatch {
            expected: m.n_rows(),
            got: labels.len(),
        });
    }
    if labels.distinct_states() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    if params.n_trees == 0 || params.min_samples_leaf == 0 {
        return Err(ClassifyError::InvalidParams(format!("{params:?}")));
    }
    let nf = m.n_features();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (nf as f64).sqrt().ceil() as usize)
        .clamp(1, nf.max(1));
    let n_classes = labels.labels.iter().max().map_or(0, |l| l + 1);
    let cfg = TreeConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features,
        n_classes,
    };
    let data = Samples {
        values: m.values(),
        n_features: nf,
        labels: &labels.labels,
    };
    let n = m.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed, &[t as u64]);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            DecisionTree::fit(&data, rows, &cfg, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_classes,
        feature_names: m.feature_names().to_vec(),
        scaling: m.scaling().cloned(),
        params: *params,
        max_features,
        seed,
    })
}

impl ForestModel {
    /// Per-tree votes for one row already in model space; ties go to the
    /// lower label.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(x)] += 1;
        }
        argmax_lowest(&votes)
    }

    pub fn predict(&self, m: &FeatureMatrix) -> Result<StateAssignment, ClassifyError> {
        let prepared = conform(m, &self.feature_names, self.scaling.as_ref())
            .map_err(|e| ClassifyError::FeatureMismatch(e.to_string()))?;
        let labels = (0..prepared.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(prepared.row(i)))
            .collect();
        Ok(StateAssignment::new(m.timestamps().to_vec(), labels))
    }

    pub fn to_json(&self, metadata: &BTreeMap<String, String>) -> String {
        let doc = ForestDoc {
            format: FOREST_FORMAT.to_string(),
            version: FOREST_VERSION,
            model: self.clone(),
            metadata: metadata.clone(),
        };
        serde_json::to_string(&doc).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<(Self, BTreeMap<String, String>), ClassifyError> {
        let doc: ForestDoc = serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if doc.format != FOREST_FORMAT || doc.version != FOREST_VERSION {
            return Err(ClassifyError::Format(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok((doc.model, doc.metadata))
    }
}

pub fn predict(model: &ForestModel, m: &FeatureMatrix) -> Result<StateAssignment, ClassifyError> {
    model.predict(m)
}

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ForestModel,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::super::tree::Node;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> (FeatureMatrix, StateAssignment) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 3;
            rows.push((0..4).map(|f| g.sample(&mut rng) + if f == l { 10.0 } else { 0.0 }).collect());
            labels.push(l);
        }
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let ts = m.timestamps().to_vec();
        (m, StateAssignment::new(ts, labels))
    }

    #[test]
    fn separable_training_accuracy() {
        let (m, y) = blobs(150, 1);
        let f = train_forest(&m, &y, &ForestParams { n_trees: 25, ..Default::default() }, 3).unwrap();
        assert_eq!(f.predict(&m).unwrap(), y);
        assert_eq!(f.max_features, 2);
    }

    #[test]
    fn thresholds_inside_training_range_and_gains_nonnegative() {
        let (m, y) = blobs(90, 2);
        let f = train_forest(&m, &y, &ForestParams { n_trees: 10, ..Default::default() }, 0).unwrap();
        for t in &f.trees {
            for node in &t.nodes {
                if let Node::Split { feature, threshold, gain, .. } = node {
                    let col: Vec<f64> = m.rows().map(|r| r[*feature]).collect();
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert!(*threshold >= lo && *threshold <= hi);
                    assert!(*gain >= 0.0);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let (m, y) = blobs(60, 4);
        let p = ForestParams { n_trees: 8, ..Default::default() };
        let a = train_forest(&m, &y, &p, 11).unwrap();
        let b = train_forest(&m, &y, &p, 11).unwrap();
        assert_eq!(a, b);
        let mut rev = a.clone();
        rev.trees.reverse();
        assert_eq!(a.predict(&m).unwrap(), rev.predict(&m).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let m = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let y = StateAssignment::new(m.timestamps().to_vec(), vec![1, 1]);
        assert!(matches!(
            train_forest(&m, &y, &ForestParams::default(), 0),
            Err(ClassifyError::SingleClass)
        ));
    }

    #[test]
    fn empty_and_duplicate_rows() {
        let (m, y) = blobs(30, 5);
        let f = train_forest(&m, &y, &ForestParams { n_trees: 5, ..Default::default() }, 0).unwrap();
        assert!(f.predict(&m.subset(&[])).unwrap().is_empty());
        let dup = f.predict(&m.subset(&[3, 3, 3])).unwrap();
        assert!(dup.labels.iter().all(|&l| l == dup.labels[0]));
        let other = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(f.predict(&other), Err(ClassifyError::FeatureMismatch(_))));
    }

    #[test]
    fn json_round_trip() {
        let (m, y) = blobs(30, 6);
        let f = train_forest(&m, &y, &ForestParams { n_trees: 3, ..Default::default() }, 0).unwrap();
        let (back, meta) = ForestModel::from_json(&f.to_json(&BTreeMap::new())).unwrap();
        assert!(meta.is_empty());
        assert_eq!(back, f);
    }
}
