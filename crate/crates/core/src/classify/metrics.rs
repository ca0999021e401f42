use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{assign_nearest, StateAssignment, StateModel};
use crate::features::FeatureMatrix;

use super::forest::ForestModel;
use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    /// Weighted by true-label support.
    Weighted,
    Micro,
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Self::Macro),
            "weighted" => Ok(Self::Weighted),
            "micro" => Ok(Self::Micro),
            other => Err(format!("unknown averaging '{other}'")),
        }
    }
}

/// F1 comparison of a predicted and a reference labelling.
///
/// Classes are the union of labels seen in either input. The confusion matrix
/// is indexed `[true][predicted]` over labels `0..labels.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Calendar day (`YYYY-MM-DD`) when the report covers one day.
    pub date: Option<String>,
    pub averaging: Averaging,
    /// Aggregate under `averaging`.
    pub f1: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub f1_micro: f64,
    pub per_class_f1: BTreeMap<usize, f64>,
    pub confusion: Vec<Vec<usize>>,
    /// True-label counts, indexed by label.
    pub support: Vec<usize>,
    pub n_states_pred: usize,
    pub n_states_truth: usize,
    /// The reference labelling has a single class.
    pub single_class: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class F1 is `2TP / (2TP + FP + FN)` (equal to `2PR / (P + R)`), with 0
/// when the denominator is 0. Empty inputs yield an all-zero report.
pub fn f1_score(
    pred: &StateAssignment,
    truth: &StateAssignment,
    averaging: Averaging,
) -> Result<EvaluationReport, ClassifyError> {
    if pred.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let k = pred
        .labels
        .iter()
        .chain(&truth.labels)
        .max()
        .map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        confusion[t][p] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted: Vec<usize> = (0..k).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
    let mut per_class_f1 = BTreeMap::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for c in 0..k {
        if support[c] == 0 && predicted[c] == 0 {
            continue;
        }
        let tp = confusion[c][c];
        let (fp, fneg) = (predicted[c] - tp, support[c] - tp);
        per_class_f1.insert(c, ratio(2 * tp, 2 * tp + fp + fneg));
        tp_all += tp;
        fp_all += fp;
        fn_all += fneg;
    }
    let n = truth.len();
    let f1_macro = if per_class_f1.is_empty() {
        0.0
    } else {
        per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64
    };
    let f1_weighted = if n == 0 {
        0.0
    } else {
        per_class_f1
            .iter()
            .map(|(&c, &f)| f * support[c] as f64)
            .sum::<f64>()
            / n as f64
    };
    let f1_micro = ratio(2 * tp_all, 2 * tp_all + fp_all + fn_all);
    let f1 = match averaging {
        Averaging::Macro => f1_macro,
        Averaging::Weighted => f1_weighted,
        Averaging::Micro => f1_micro,
    };
    let n_states_truth = truth.distinct_states();
    Ok(EvaluationReport {
        date: None,
        averaging,
        f1,
        f1_macro,
        f1_weighted,
        f1_micro,
        per_class_f1,
        confusion,
        support,
        n_states_pred: pred.distinct_states(),
        n_states_truth,
        single_class: n_states_truth == 1,
    })
}

/// Scores the forest on one day against the state model's nearest-centroid
/// labels.
pub fn evaluate_day(
    forest: &ForestModel,
    state_model: &StateModel,
    day_features: &FeatureMatrix,
    averaging: Averaging,
) -> Result<EvaluationReport, ClassifyError> {
    let truth = assign_nearest(state_model, day_features)
        .map_err(|e| ClassifyError::FeatureMismatch(e.to_string()))?;
    let pred = forest.predict(day_features)?;
    let mut report = f1_score(&pred, &truth, averaging)?;
    if let Some(&ts) = day_features.timestamps().first() {
        report.date = Some(crate::time::date_of(ts).format("%Y-%m-%d").to_string());
    }
    Ok(report)
}
