//! Statistical descriptors of sanitized CSI windows, PCA reduction and
//! `[-1, +1]` normalization.
//!
//! Each one-second window yields, for every subcarrier and for both the
//! filtered amplitude and the filtered phase difference, the eight
//! statistics of [`Statistic`]. Values are laid out statistic-major:
//! `index = (stat * subcarriers + subcarrier) * 2 + channel`, channel 0
//! being amplitude and 1 the phase difference. With 30 subcarriers that is
//! 480 values.

mod normalize;
mod pca;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi_pipeline::ProcessedSeries;

pub use normalize::{fit_normalizer, Normalizer};
pub use pca::{fit_pca, PcaModel};
pub use stats::{describe, Statistic, STAT_COUNT};

/// Minimum number of samples in a window.
pub const MIN_WINDOW_SAMPLES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no complete window in a series of {0} samples")]
    Empty(usize),
    #[error("window of {0} samples is shorter than the minimum of {MIN_WINDOW_SAMPLES}")]
    WindowTooShort(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("data has no variance to retain")]
    ConstantData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Raw feature descriptor of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub window_id: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Feature dimension for `subcarriers` subcarriers.
pub fn feature_dim(subcarriers: usize) -> usize {
    STAT_COUNT * subcarriers * 2
}

/// Position of one statistic in a [`FeatureVector`].
pub fn feature_index(stat: Statistic, subcarrier: usize, channel: usize, subcarriers: usize) -> usize {
    (stat as usize * subcarriers + subcarrier) * 2 + channel
}

/// A borrowed window of sanitized samples.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub index: usize,
    /// Per subcarrier, `len` samples.
    pub amplitudes: Vec<&'a [f64]>,
    /// Per subcarrier, `len - 1` samples.
    pub phase_diffs: Vec<&'a [f64]>,
}

/// Splits a series into consecutive non-overlapping windows of `window_s`
/// seconds. A trailing partial window is dropped.
pub fn window(series: &ProcessedSeries, window_s: f64) -> Result<Vec<Window<'_>>, FeatureError> {
    let len = (window_s * series.rate_hz).round() as usize;
    if !window_s.is_finite() || window_s <= 0.0 || len < MIN_WINDOW_SAMPLES {
        return Err(FeatureError::WindowTooShort(len));
    }
    let count = series.len() / len;
    if count == 0 {
        return Err(FeatureError::Empty(series.len()));
    }
    Ok((0..count)
        .map(|w| {
            let start = w * len;
            Window {
                index: w,
                amplitudes: series
                    .filtered_amplitudes
                    .iter()
                    .map(|c| &c[start..start + len])
                    .collect(),
                phase_diffs: series
                    .filtered_phase_diffs
                    .iter()
                    .map(|c| &c[start..start + len - 1])
                    .collect(),
            }
        })
        .collect())
}

/// Computes the statistic-major feature vector of one window.
pub fn extract_stats(window: &Window<'_>) -> FeatureVector {
    let n = window.amplitudes.len();
    let mut values = vec![0.0; feature_dim(n)];
    for (channel, series) in [&window.amplitudes, &window.phase_diffs].into_iter().enumerate() {
        for (k, samples) in series.iter().enumerate() {
            for (stat, v) in Statistic::ALL.iter().zip(describe(samples)) {
                values[feature_index(*stat, k, channel, n)] = v;
            }
        }
    }
    FeatureVector {
        window_id: window.index,
        values,
    }
}
