//! CSI sanitization: Butterworth smoothing and phase differencing.
//!
//! Amplitudes are low-pass filtered directly. Raw phases carry per-packet
//! offsets and a clock-offset ramp, so they are first differenced between
//! consecutive packets (which cancels any constant offset and turns a linear
//! ramp into a constant) and the differences are then filtered with the same
//! low-pass filter.

mod butterworth;
mod csv_io;
mod phase;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use butterworth::{design_butterworth, filter_series, Biquad, Butterworth};
pub use csv_io::{read_csv, read_csv_file, write_csv, write_csv_file, FrameReader};
pub use phase::{phase_difference, wrap_phase};

/// Packet rate assumed when a series is too short to infer one.
pub const DEFAULT_RATE_HZ: f64 = 50.0;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid filter spec: {0}")]
    InvalidFilter(String),
    #[error("cutoff {cutoff_hz} Hz must be below Nyquist ({nyquist_hz} Hz)")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("series too short: {len} samples, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One received packet: per-subcarrier amplitude and raw phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiFrame {
    pub timestamp_us: u64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl CsiFrame {
    pub fn subcarriers(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Frames at a nominal packet rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiSeries {
    pub rate_hz: f64,
    pub frames: Vec<CsiFrame>,
}

impl CsiSeries {
    pub fn new(rate_hz: f64, frames: Vec<CsiFrame>) -> Result<Self, PipelineError> {
        let series = Self { rate_hz, frames };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn subcarriers(&self) -> usize {
        self.frames.first().map_or(0, CsiFrame::subcarriers)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.rate_hz
    }

    /// Sub-series of frames `range`, sharing the nominal rate.
    pub fn slice(&self, range: std::ops::Range<usize>) -> CsiSeries {
        CsiSeries {
            rate_hz: self.rate_hz,
            frames: self.frames[range].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(PipelineError::InvalidSeries(format!("rate {} Hz", self.rate_hz)));
        }
        let n = self.subcarriers();
        for (i, f) in self.frames.iter().enumerate() {
            if f.amplitudes.len() != n || f.phases.len() != n || n == 0 {
                return Err(PipelineError::InvalidSeries(format!(
                    "frame {i}: {} amplitudes / {} phases, expected {n}",
                    f.amplitudes.len(),
                    f.phases.len()
                )));
            }
        }
        if let Some(i) = self
            .frames
            .windows(2)
            .position(|w| w[1].timestamp_us <= w[0].timestamp_us)
        {
            return Err(PipelineError::InvalidSeries(format!(
                "timestamp of frame {} does not increase",
                i + 1
            )));
        }
        Ok(())
    }

    /// Amplitudes regrouped per subcarrier.
    pub fn amplitude_columns(&self) -> Vec<Vec<f64>> {
        columns(&self.frames, |f| &f.amplitudes)
    }

    /// Raw phases regrouped per subcarrier.
    pub fn phase_columns(&self) -> Vec<Vec<f64>> {
        columns(&self.frames, |f| &f.phases)
    }
}

fn columns(frames: &[CsiFrame], field: impl Fn(&CsiFrame) -> &Vec<f64>) -> Vec<Vec<f64>> {
    let n = frames.first().map_or(0, |f| field(f).len());
    let mut out = vec![Vec::with_capacity(frames.len()); n];
    for f in frames {
        for (col, v) in out.iter_mut().zip(field(f)) {
            col.push(*v);
        }
    }
    out
}

/// Low-pass filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub rate_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 5,
            cutoff_hz: 1.0,
            rate_hz: DEFAULT_RATE_HZ,
        }
    }
}

impl FilterSpec {
    pub fn with_rate(rate_hz: f64) -> Self {
        Self {
            rate_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.order == 0 {
            return Err(PipelineError::InvalidFilter("order must be >= 1".into()));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(PipelineError::InvalidFilter(format!("rate {}", self.rate_hz)));
        }
        if !(self.cutoff_hz.is_finite() && self.cutoff_hz > 0.0) {
            return Err(PipelineError::InvalidFilter(format!("cutoff {}", self.cutoff_hz)));
        }
        if self.cutoff_hz >= self.rate_hz / 2.0 {
            return Err(PipelineError::CutoffAboveNyquist {
                cutoff_hz: self.cutoff_hz,
                nyquist_hz: self.rate_hz / 2.0,
            });
        }
        Ok(())
    }

    /// Samples of edge padding applied before zero-phase filtering.
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }
}

/// Sanitized per-subcarrier series.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSeries {
    pub rate_hz: f64,
    /// `[subcarrier][t]`, length N.
    pub filtered_amplitudes: Vec<Vec<f64>>,
    /// `[subcarrier][t]`, length N - 1.
    pub filtered_phase_diffs: Vec<Vec<f64>>,
}

impl ProcessedSeries {
    pub fn len(&self) -> usize {
        self.filtered_amplitudes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subcarriers(&self) -> usize {
        self.filtered_amplitudes.len()
    }
}

/// Filters amplitudes and differenced phases of every subcarrier.
pub fn sanitize(series: &CsiSeries, spec: &FilterSpec) -> Result<ProcessedSeries, PipelineError> {
    if series.is_empty() {
        return Err(PipelineError::InvalidSeries("empty series".into()));
    }
    series.validate()?;
    let filter = design_butterworth(spec)?;
    let filtered_amplitudes = series
        .amplitude_columns()
        .iter()
        .map(|col| filter.apply_zero_phase(col))
        .collect::<Result<Vec<_>, _>>()?;
    let filtered_phase_diffs = series
        .phase_columns()
        .iter()
        .map(|col| filter.apply_zero_phase(&phase_difference(col)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProcessedSeries {
        rate_hz: series.rate_hz,
        filtered_amplitudes,
        filtered_phase_diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::{synthesize_csi, synthetic_subject_scene, NoiseModel};

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn filter_spec_validation() {
        assert!(FilterSpec::default().validate().is_ok());
        let bad = FilterSpec {
            cutoff_hz: 25.0,
            ..FilterSpec::default()
        };
        assert!(matches!(bad.validate(), Err(PipelineError::CutoffAboveNyquist { .. })));
        let bad = FilterSpec {
            order: 0,
            ..FilterSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noiseless_scene_sanitizes_to_constants() {
        let mut scene = synthetic_subject_scene(2, 1);
        scene.noise = NoiseModel::zero();
        let series = synthesize_csi(&scene, 4.0).unwrap();
        let p = sanitize(&series, &FilterSpec::default()).unwrap();
        assert_eq!(p.len(), 200);
        for col in &p.filtered_amplitudes {
            let first = col[0];
            assert!(col.iter().all(|v| ((v - first) / first).abs() < 1e-6));
        }
        for col in &p.filtered_phase_diffs {
            assert_eq!(col.len(), 199);
            assert!(col.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn cfo_only_gives_constant_phase_diffs() {
        let mut scene = synthetic_subject_scene(2, 1);
        scene.noise = NoiseModel {
            cfo_delta_t: 1.0e-10,
            ..NoiseModel::zero()
        };
        let series = synthesize_csi(&scene, 3.0).unwrap();
        let p = sanitize(&series, &FilterSpec::default()).unwrap();
        for (col, f) in p.filtered_phase_diffs.iter().zip(scene.subcarrier_freqs()) {
            let slope = wrap_phase(2.0 * std::f64::consts::PI * f * 1.0e-10 / scene.rate_hz);
            assert!(col.iter().all(|v| (v - slope).abs() < 1e-6));
        }
    }

    #[test]
    fn noisy_input_is_smoothed() {
        let scene = synthetic_subject_scene(4, 9);
        let series = synthesize_csi(&scene, 10.0).unwrap();
        let p = sanitize(&series, &FilterSpec::default()).unwrap();
        for (raw, filt) in series.amplitude_columns().iter().zip(&p.filtered_amplitudes) {
            assert!(variance(filt) < variance(raw));
        }
        for (raw, filt) in series.phase_columns().iter().zip(&p.filtered_phase_diffs) {
            let diffs = phase_difference(raw).unwrap();
            assert!(variance(filt) < variance(&diffs));
        }
    }

    #[test]
    fn empty_series_rejected() {
        let s = CsiSeries {
            rate_hz: 50.0,
            frames: vec![],
        };
        assert!(sanitize(&s, &FilterSpec::default()).is_err());
    }
}
