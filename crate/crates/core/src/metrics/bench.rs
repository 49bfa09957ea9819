use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::csi_pipeline::{sanitize, CsiSeries, FilterSpec};
use crate::features::{extract_stats, window};
use crate::matcher::{RegisteredProfile, RegistrationOptions, MIN_PERIOD_SAMPLES};
use crate::pipeline::{features_from_series, frames_for};
use crate::{Error, Result};

/// Median and worst wall time of one stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub median: f64,
    pub max: f64,
}

impl StageLatency {
    fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let median = if n % 2 == 1 {
            ms[n / 2]
        } else {
            0.5 * (ms[n / 2 - 1] + ms[n / 2])
        };
        Self {
            median,
            max: ms[n - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub filter: StageLatency,
    pub features: StageLatency,
    #[serde(rename = "match")]
    pub matching: StageLatency,
    pub iterations: usize,
}

impl LatencyReport {
    /// Sum of the three stage medians.
    pub fn total_median(&self) -> f64 {
        self.filter.median + self.features.median + self.matching.median
    }
}

/// Times sanitization, feature extraction and matching of one `window_s`
/// window taken from the start of `series`, `iters` times.
pub fn bench_stages(series: &CsiSeries, profile: &RegisteredProfile, iters: usize) -> Result<LatencyReport> {
    if iters < 10 {
        return Err(Error::Invalid(format!("iterations must be >= 10, got {iters}")));
    }
    let len = frames_for(profile.window_s, series.rate_hz);
    if series.len() < len {
        return Err(Error::InsufficientData {
            needed: format!("{len} frames"),
            available: format!("{} frames", series.len()),
        });
    }
    let one = series.slice(0..len);
    let spec = FilterSpec {
        rate_hz: series.rate_hz,
        ..profile.filter
    };
    let (mut filter, mut features, mut matching) = (vec![], vec![], vec![]);
    for _ in 0..iters {
        let t0 = Instant::now();
        let processed = sanitize(&one, &spec)?;
        let t1 = Instant::now();
        let windows = window(&processed, profile.window_s)?;
        let fv = extract_stats(&windows[0]);
        let t2 = Instant::now();
        let decision = profile.authenticate(&fv.values)?;
        let t3 = Instant::now();
        std::hint::black_box(decision);
        filter.push((t1 - t0).as_secs_f64() * 1e3);
        features.push((t2 - t1).as_secs_f64() * 1e3);
        matching.push((t3 - t2).as_secs_f64() * 1e3);
    }
    Ok(LatencyReport {
        filter: StageLatency::from_samples(filter),
        features: StageLatency::from_samples(features),
        matching: StageLatency::from_samples(matching),
        iterations: iters,
    })
}

/// A profile registered on whatever `series` holds, for timing only: up to
/// four periods of at least ten windows each.
pub fn profile_for_bench(series: &CsiSeries, filter: &FilterSpec) -> Result<RegisteredProfile> {
    let fv = features_from_series(series, filter, 1.0)?;
    let t = (fv.len() / MIN_PERIOD_SAMPLES).min(4);
    if t == 0 {
        return Err(Error::InsufficientData {
            needed: format!("{MIN_PERIOD_SAMPLES} s"),
            available: format!("{:.1} s", series.duration_s()),
        });
    }
    let per = fv.len() / t;
    let groups: Vec<Vec<Vec<f64>>> = fv
        .chunks(per)
        .take(t)
        .map(|c| c.iter().map(|f| f.values.clone()).collect())
        .collect();
    let options = RegistrationOptions {
        period_secs: per as f64,
        filter: *filter,
        ..RegistrationOptions::default()
    };
    Ok(RegisteredProfile::register(&groups, &options)?)
}
