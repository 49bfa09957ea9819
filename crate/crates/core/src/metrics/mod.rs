//! Evaluation metrics and the evaluation harness.
//!
//! - mean interruption interval: `sum_t n_t t / N` over the minute at which
//!   each subject was first (wrongly) locked out, the horizon counting as
//!   "never";
//! - mean authentication accuracy: the mean of [`subject_accuracy`], i.e.
//!   `(t - I) / t` for an interruption at minute `t` on a grid of step `I`,
//!   and 1 for the horizon;
//! - mean defending precision: `1 - sum_{i != j} p(i, j) / (N (N - 1))`
//!   where `p(i, j)` is the fraction of subject `j`'s attempts accepted
//!   while subject `i` is registered.

mod bench;
mod eval;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{bench_stages, profile_for_bench, LatencyReport, StageLatency};
pub use eval::{run_evaluation, EvalConfig, SubjectResult, SubjectStream};

/// Default authentication interval, minutes.
pub const DEFAULT_INTERVAL_MIN: f64 = 5.0;
/// Default evaluation horizon, minutes.
pub const DEFAULT_HORIZON_MIN: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no subjects")]
    Empty,
    #[error("need at least {needed} subjects, got {got}")]
    TooFewSubjects { needed: usize, got: usize },
    #[error("{0} min is not a point of the {1} min grid")]
    OffGrid(f64, f64),
    #[error("invalid grid: interval {interval_min} min, horizon {horizon_min} min")]
    InvalidGrid { interval_min: f64, horizon_min: f64 },
    #[error("subject {subject}: stream of {available_s:.1} s is shorter than the {needed_s:.1} s required")]
    StreamTooShort {
        subject: String,
        needed_s: f64,
        available_s: f64,
    },
    #[error("confusion entry ({0}, {1}) = {2} outside [0, 1]")]
    BadRate(usize, usize, f64),
}

fn grid_steps(interval_min: f64, horizon_min: f64) -> Result<usize, MetricsError> {
    let bad = MetricsError::InvalidGrid {
        interval_min,
        horizon_min,
    };
    if !(interval_min > 0.0 && horizon_min >= interval_min && horizon_min.is_finite()) {
        return Err(bad);
    }
    let steps = (horizon_min / interval_min).round();
    if (steps * interval_min - horizon_min).abs() > 1e-9 * horizon_min {
        return Err(bad);
    }
    Ok(steps as usize)
}

/// Counts of first-interruption times on the grid `I, 2I, ..., H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptionHistogram {
    pub interval_min: f64,
    pub horizon_min: f64,
    /// `counts[k]` is the number of subjects first interrupted at `(k + 1) I`.
    pub counts: Vec<u64>,
}

impl Default for InterruptionHistogram {
    fn default() -> Self {
        Self::new(DEFAULT_INTERVAL_MIN, DEFAULT_HORIZON_MIN).expect("default grid is valid")
    }
}

impl InterruptionHistogram {
    pub fn new(interval_min: f64, horizon_min: f64) -> Result<Self, MetricsError> {
        let steps = grid_steps(interval_min, horizon_min)?;
        Ok(Self {
            interval_min,
            horizon_min,
            counts: vec![0; steps],
        })
    }

    /// Grid times in minutes.
    pub fn grid(&self) -> Vec<f64> {
        (1..=self.counts.len()).map(|k| k as f64 * self.interval_min).collect()
    }

    fn slot(&self, t_min: f64) -> Result<usize, MetricsError> {
        let k = (t_min / self.interval_min).round();
        if k < 1.0 || k as usize > self.counts.len() || (k * self.interval_min - t_min).abs() > 1e-9 * t_min.abs().max(1.0) {
            return Err(MetricsError::OffGrid(t_min, self.interval_min));
        }
        Ok(k as usize - 1)
    }

    pub fn record(&mut self, t_min: f64) -> Result<(), MetricsError> {
        let k = self.slot(t_min)?;
        self.counts[k] += 1;
        Ok(())
    }

    pub fn set(&mut self, t_min: f64, count: u64) -> Result<(), MetricsError> {
        let k = self.slot(t_min)?;
        self.counts[k] = count;
        Ok(())
    }

    pub fn count(&self, t_min: f64) -> Result<u64, MetricsError> {
        Ok(self.counts[self.slot(t_min)?])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Accuracy of one subject first interrupted at minute `t` on the default
/// 5-minute / 60-minute grid.
pub fn subject_accuracy(t_min: f64) -> Result<f64, MetricsError> {
    subject_accuracy_on(t_min, DEFAULT_INTERVAL_MIN, DEFAULT_HORIZON_MIN)
}

/// `(t - I) / t` below the horizon, 1 at the horizon.
pub fn subject_accuracy_on(t_min: f64, interval_min: f64, horizon_min: f64) -> Result<f64, MetricsError> {
    let h = InterruptionHistogram::new(interval_min, horizon_min)?;
    let k = h.slot(t_min)?;
    if k + 1 == h.counts.len() {
        Ok(1.0)
    } else {
        let t = (k + 1) as f64 * interval_min;
        Ok((t - interval_min) / t)
    }
}

pub fn mean_interruption_interval(h: &InterruptionHistogram) -> Result<f64, MetricsError> {
    let n = h.total();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let weighted: f64 = h.grid().iter().zip(&h.counts).map(|(t, c)| t * *c as f64).sum();
    Ok(weighted / n as f64)
}

pub fn mean_auth_accuracy(h: &InterruptionHistogram) -> Result<f64, MetricsError> {
    let n = h.total();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let last = h.counts.len() - 1;
    let sum: f64 = h
        .grid()
        .iter()
        .zip(&h.counts)
        .enumerate()
        .map(|(k, (t, c))| {
            let acc = if k == last { 1.0 } else { (t - h.interval_min) / t };
            *c as f64 * acc
        })
        .sum();
    Ok(sum / n as f64)
}

/// Per-pair false-acceptance rates; the diagonal is unused and kept at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub subjects: Vec<String>,
    /// `rates[i][j]`: fraction of subject `j`'s attempts accepted against
    /// subject `i`'s profile.
    pub rates: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(subjects: Vec<String>) -> Self {
        let n = subjects.len();
        Self {
            subjects,
            rates: vec![vec![0.0; n]; n],
        }
    }

    pub fn size(&self) -> usize {
        self.rates.len()
    }

    pub fn set(&mut self, registered: usize, adversary: usize, rate: f64) -> Result<(), MetricsError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(MetricsError::BadRate(registered, adversary, rate));
        }
        if registered != adversary {
            self.rates[registered][adversary] = rate;
        }
        Ok(())
    }

    pub fn get(&self, registered: usize, adversary: usize) -> f64 {
        self.rates[registered][adversary]
    }
}

pub fn mean_defending_precision(c: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = c.size();
    if n < 2 {
        return Err(MetricsError::TooFewSubjects { needed: 2, got: n });
    }
    let mut sum = 0.0;
    for (i, row) in c.rates.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if i != j {
                if !(0.0..=1.0).contains(p) {
                    return Err(MetricsError::BadRate(i, j, *p));
                }
                sum += p;
            }
        }
    }
    Ok(1.0 - sum / (n * (n - 1)) as f64)
}

/// Outcome of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mii_minutes: f64,
    pub maa: f64,
    pub mdp: f64,
    pub histogram: InterruptionHistogram,
    pub confusion: ConfusionMatrix,
    pub subjects: Vec<SubjectResult>,
    pub latency_ms: LatencyReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
