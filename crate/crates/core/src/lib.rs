//! Contactless continuous user authentication from Wi-Fi channel state
//! information (CSI).
//!
//! The crate is organised along the processing chain:
//!
//! - [`body_model`]: concentric-tissue electromagnetic body model and a CSI
//!   synthesizer that stands in for radio hardware.
//! - [`csi_pipeline`]: Butterworth smoothing of amplitudes and
//!   offset-cancelling phase differencing.
//! - [`features`]: per-window statistics, PCA reduction and `[-1, +1]`
//!   normalization.
//! - [`matcher`]: multi-period Gaussian likelihood matching with an OR
//!   decision across periods.
//! - [`metrics`]: interruption / accuracy / defending-precision metrics and
//!   the evaluation harness.
//! - [`session`]: the login → register → monitor → lock state machine.

pub mod body_model;
pub mod csi_pipeline;
pub mod features;
pub mod matcher;
pub mod metrics;
pub mod pipeline;
pub mod session;

mod error;

pub use error::{Error, Result};

pub use body_model::{BodyProfile, NoiseModel, PathGeometry, Scene, TissueLayer};
pub use csi_pipeline::{CsiFrame, CsiSeries, FilterSpec, ProcessedSeries};
pub use features::{FeatureVector, Normalizer, PcaModel};
pub use matcher::{AuthDecision, PeriodModel, RegisteredProfile};
pub use metrics::{ConfusionMatrix, EvalReport, InterruptionHistogram};
pub use session::{Session, SessionConfig, SessionEvent};
