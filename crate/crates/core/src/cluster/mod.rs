//! State discovery: K-Means, inertia, silhouette, elbow detection and the
//! fitted state model.

mod elbow;
mod kmeans;
mod silhouette;
mod state;
mod sweep;

use thiserror::Error;

pub use elbow::{chord_distances, detect_elbow, ElbowBand, BAND_FRACTION};
pub use kmeans::{kmeans_fit, total_sse, KMeansModel, KMeansParams};
pub use silhouette::{silhouette_samples, silhouette_score};
pub use state::{
    assign_nearest, fit_state_model, KSelection, StateAssignment, StateModel, STATE_MODEL_FORMAT,
    STATE_MODEL_VERSION,
};
pub use sweep::{sweep_k, KSweepReport, RULE_BAND_ONLY, RULE_DEGENERATE, RULE_SILHOUETTE_IN_BAND};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{rows} rows cannot form {k} clusters")]
    TooFewSamples { rows: usize, k: usize },
    #[error("invalid cluster count {0}")]
    InvalidK(usize),
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("features do not match the model: {0}")]
    FeatureMismatch(String),
    #[error("state model document: {0}")]
    Format(String),
}
