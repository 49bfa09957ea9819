use thiserror::Error;

use crate::body_model::ModelError;
use crate::csi_pipeline::PipelineError;
use crate::features::FeatureError;
use crate::matcher::MatchError;
use crate::metrics::MetricsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error for operations that span several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: String, available: String },
    #[error("{0}")]
    Invalid(String),
}
