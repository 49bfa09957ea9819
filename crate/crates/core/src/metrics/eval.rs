use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bench_stages, mean_auth_accuracy, mean_defending_precision, mean_interruption_interval, subject_accuracy_on,
    ConfusionMatrix, EvalReport, InterruptionHistogram, LatencyReport, MetricsError, DEFAULT_HORIZON_MIN,
    DEFAULT_INTERVAL_MIN,
};
use crate::csi_pipeline::{CsiSeries, FilterSpec};
use crate::matcher::{RegisteredProfile, RegistrationOptions};
use crate::pipeline::{features_from_series, frames_for, register_series};
use crate::Result;

/// One subject's recording: registration followed by monitoring.
#[derive(Debug, Clone)]
pub struct SubjectStream {
    pub name: String,
    pub series: CsiSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub periods: usize,
    pub period_secs: f64,
    pub window_s: f64,
    pub interval_min: f64,
    pub horizon_min: f64,
    pub filter: FilterSpec,
    pub update_enabled: bool,
    /// Bench repetitions for the latency summary; 0 skips timing.
    pub latency_iters: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            periods: 4,
            period_secs: 30.0,
            window_s: 1.0,
            interval_min: DEFAULT_INTERVAL_MIN,
            horizon_min: DEFAULT_HORIZON_MIN,
            filter: FilterSpec::default(),
            update_enabled: true,
            latency_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub name: String,
    /// Minute of the first lock-out; the horizon when never locked out.
    pub first_interruption_min: f64,
    pub accuracy: f64,
}

struct Prepared {
    profile: RegisteredProfile,
    /// `[interval][window]` raw feature vectors of the monitoring stream.
    intervals: Vec<Vec<Vec<f64>>>,
}

fn prepare(subject: &SubjectStream, config: &EvalConfig, steps: usize) -> Result<Prepared> {
    let series = &subject.series;
    let options = RegistrationOptions {
        period_secs: config.period_secs,
        window_s: config.window_s,
        filter: config.filter,
        ..RegistrationOptions::default()
    };
    let reg_frames = frames_for(config.periods as f64 * config.period_secs, series.rate_hz);
    let interval_frames = frames_for(config.interval_min * 60.0, series.rate_hz);
    if series.len() < reg_frames + interval_frames || interval_frames == 0 {
        return Err(MetricsError::StreamTooShort {
            subject: subject.name.clone(),
            needed_s: (reg_frames + interval_frames) as f64 / series.rate_hz,
            available_s: series.len() as f64 / series.rate_hz,
        }
        .into());
    }
    let profile = register_series(series, config.periods, &options)?;
    let available = (series.len() - reg_frames) / interval_frames;
    let intervals = (0..available.min(steps))
        .map(|k| {
            let start = reg_frames + k * interval_frames;
            let segment = series.slice(start..start + interval_frames);
            let fv = features_from_series(&segment, &config.filter, config.window_s)?;
            Ok(fv.into_iter().map(|f| f.values).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { profile, intervals })
}

/// Replays `intervals` against a running profile. Each interval is decided
/// by majority over its windows (ties accept); an accepted interval updates
/// the profile with its last period's worth of windows. Returns one flag per
/// interval, stopping after the first rejection when `stop_on_reject`.
fn replay(
    profile: &RegisteredProfile,
    intervals: &[Vec<Vec<f64>>],
    config: &EvalConfig,
    stop_on_reject: bool,
) -> Result<Vec<bool>> {
    let update_windows = (config.period_secs / config.window_s).round() as usize;
    let mut current = profile.clone();
    let mut out = Vec::with_capacity(intervals.len());
    for windows in intervals {
        let mut accepted = 0;
        for w in windows {
            if current.authenticate(w)?.accepted {
                accepted += 1;
            }
        }
        let pass = 2 * accepted >= windows.len();
        out.push(pass);
        if !pass && stop_on_reject {
            break;
        }
        if pass && config.update_enabled {
            let latest = &windows[windows.len().saturating_sub(update_windows)..];
            if let Ok(next) = current.updated(latest) {
                current = next;
            }
        }
    }
    Ok(out)
}

/// Registers every subject on the start of its own stream, then
///
/// - replays its own monitoring stream interval by interval until the first
///   rejection, which fixes its first-interruption minute;
/// - replays every other subject's monitoring stream in full against it;
///   the accepted fraction of intervals fills the confusion matrix.
///
/// Subjects are processed in parallel; the report does not depend on
/// scheduling. If some stream holds fewer intervals than the horizon, the
/// horizon shrinks to what every stream covers.
pub fn run_evaluation(subjects: &[SubjectStream], config: &EvalConfig) -> Result<EvalReport> {
    if subjects.len() < 2 {
        return Err(MetricsError::TooFewSubjects {
            needed: 2,
            got: subjects.len(),
        }
        .into());
    }
    let steps = InterruptionHistogram::new(config.interval_min, config.horizon_min)?
        .counts
        .len();
    let prepared = subjects
        .par_iter()
        .map(|s| prepare(s, config, steps))
        .collect::<Result<Vec<_>>>()?;
    let steps = prepared.iter().map(|p| p.intervals.len()).min().unwrap_or(0).min(steps);
    let horizon = steps as f64 * config.interval_min;
    let mut histogram = InterruptionHistogram::new(config.interval_min, horizon)?;

    let rows = prepared
        .par_iter()
        .enumerate()
        .map(|(i, reg)| {
            let own = replay(&reg.profile, &reg.intervals[..steps], config, true)?;
            let first = own.iter().position(|pass| !pass).map_or(steps, |k| k + 1);
            let rates = prepared
                .iter()
                .enumerate()
                .map(|(j, adv)| {
                    if i == j {
                        return Ok(0.0);
                    }
                    let flags = replay(&reg.profile, &adv.intervals[..steps], config, false)?;
                    Ok(flags.iter().filter(|f| **f).count() as f64 / steps as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((first, rates))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = ConfusionMatrix::new(subjects.iter().map(|s| s.name.clone()).collect());
    let mut results = Vec::with_capacity(subjects.len());
    for (i, (first, rates)) in rows.into_iter().enumerate() {
        let t = first as f64 * config.interval_min;
        histogram.record(t)?;
        results.push(SubjectResult {
            name: subjects[i].name.clone(),
            first_interruption_min: t,
            accuracy: subject_accuracy_on(t, config.interval_min, horizon)?,
        });
        for (j, p) in rates.into_iter().enumerate() {
            confusion.set(i, j, p)?;
        }
    }

    let latency_ms = if config.latency_iters > 0 {
        let reg_frames = frames_for(config.periods as f64 * config.period_secs, subjects[0].series.rate_hz);
        let monitor = subjects[0].series.slice(reg_frames..subjects[0].series.len());
        bench_stages(&monitor, &prepared[0].profile, config.latency_iters)?
    } else {
        LatencyReport::default()
    };

    Ok(EvalReport {
        mii_minutes: mean_interruption_interval(&histogram)?,
        maa: mean_auth_accuracy(&histogram)?,
        mdp: mean_defending_precision(&confusion)?,
        histogram,
        confusion,
        subjects: results,
        latency_ms,
    })
}
