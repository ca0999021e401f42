use thiserror::Error;

use crate::classify::ClassifyError;
use crate::cluster::ClusterError;
use crate::features::FeatureError;
use crate::impute::ImputeError;
use crate::ingest::IngestError;
use crate::reduce::PcaError;
use crate::synth::SynthError;

pub type Result<T> = std::result::Result<T, Error>;

/// Any error raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}
