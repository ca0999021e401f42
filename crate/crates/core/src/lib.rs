//! State identification for three-phase power monitoring data.
//!
//! The crate covers the whole offline pipeline for MiDAS-style sensor exports:
//!
//! - [`ingest`]: streaming CSV parsing of consumption (ECD) and harmonics
//!   files into [`TimestampedFrame`]s, plus grid gap detection.
//! - [`impute`]: same-time-of-day cross-day mean imputation.
//! - [`features`]: odd current-harmonic selection, minute resampling and
//!   standardization into a [`FeatureMatrix`].
//! - [`cluster`]: K-Means, silhouette scoring, elbow detection, k-sweeps and
//!   the fitted [`StateModel`].
//! - [`reduce`]: two-component PCA for plotting.
//! - [`classify`]: random-forest state assignment and F1 evaluation.
//! - [`synth`]: synthetic sensor data with known ground-truth states.

pub mod classify;
pub mod cluster;
pub mod features;
pub mod frame;
pub mod impute;
pub mod ingest;
pub mod reduce;
pub mod schema;
pub mod seed;
pub mod synth;
pub mod time;

mod error;

pub use classify::{EvaluationReport, ForestModel, ForestParams};
pub use cluster::{KMeansModel, KSweepReport, StateAssignment, StateModel};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, PhaseMode, Scaling};
pub use frame::TimestampedFrame;
pub use ingest::GapReport;
pub use reduce::PcaModel;
pub use schema::Schema;
pub use time::TimestampFormat;

/// Milliseconds in one calendar day.
pub const DAY_MS: i64 = 86_400_000;
