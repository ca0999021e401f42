//! Random-forest state assignment and F1 evaluation.

mod forest;
mod metrics;
mod tree;

use thiserror::Error;

pub use forest::{predict, train_forest, ForestModel, ForestParams, FOREST_FORMAT, FOREST_VERSION};
pub use metrics::{evaluate_day, f1_score, Averaging, EvaluationReport};
pub use tree::{gini, DecisionTree, Node};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("features do not match the model: {0}")]
    FeatureMismatch(String),
    #[error("expected {expected} labels, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("forest document: {0}")]
    Format(String),
}
