//! End-to-end glue: CSI series in, feature vectors, profiles and decisions out.

use crate::csi_pipeline::{sanitize, CsiSeries, FilterSpec};
use crate::features::{extract_stats, window, FeatureVector};
use crate::matcher::{AuthDecision, RegisteredProfile, RegistrationOptions};
use crate::{Error, Result};

/// Sanitizes `series` as one block and extracts one feature vector per
/// `window_s` window.
pub fn features_from_series(series: &CsiSeries, filter: &FilterSpec, window_s: f64) -> Result<Vec<FeatureVector>> {
    let spec = FilterSpec {
        rate_hz: series.rate_hz,
        ..*filter
    };
    let processed = sanitize(series, &spec)?;
    Ok(window(&processed, window_s)?.iter().map(extract_stats).collect())
}

/// Number of frames spanning `secs` at `rate_hz`.
pub fn frames_for(secs: f64, rate_hz: f64) -> usize {
    (secs * rate_hz).round() as usize
}

/// Registers from the first `periods * options.period_secs` seconds of
/// `series`. Each period is sanitized separately.
pub fn register_series(series: &CsiSeries, periods: usize, options: &RegistrationOptions) -> Result<RegisteredProfile> {
    if periods == 0 {
        return Err(Error::Invalid("periods must be >= 1".into()));
    }
    let per_period = frames_for(options.period_secs, series.rate_hz);
    let needed = per_period * periods;
    if series.len() < needed || per_period == 0 {
        return Err(Error::InsufficientData {
            needed: format!("{:.1} s", periods as f64 * options.period_secs),
            available: format!("{:.1} s", series.len() as f64 / series.rate_hz),
        });
    }
    let groups = (0..periods)
        .map(|p| {
            let segment = series.slice(p * per_period..(p + 1) * per_period);
            let fv = features_from_series(&segment, &options.filter, options.window_s)?;
            Ok(fv.into_iter().map(|f| f.values).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let options = RegistrationOptions {
        created_at_us: series.frames[0].timestamp_us,
        ..*options
    };
    Ok(RegisteredProfile::register(&groups, &options)?)
}

/// Per-window decisions over `series` under `profile`.
pub fn authenticate_series(profile: &RegisteredProfile, series: &CsiSeries) -> Result<Vec<AuthDecision>> {
    let features = features_from_series(series, &profile.filter, profile.window_s)?;
    features
        .iter()
        .map(|f| profile.authenticate(&f.values).map_err(Error::from))
        .collect()
}

/// Majority vote; ties accept.
pub fn majority(decisions: &[AuthDecision]) -> bool {
    let accepted = decisions.iter().filter(|d| d.accepted).count();
    2 * accepted >= decisions.len()
}
