//! Multi-period Gaussian matching.
//!
//! Registration splits the legal user's samples into `t` consecutive
//! recording periods. Each period becomes an independent diagonal Gaussian
//! with its own acceptance threshold, and a new sample is accepted when it
//! passes *any* period's threshold. Several small clusters cover the user's
//! states much more tightly than one large cluster would.
//!
//! A sample's score under a period is the geometric mean of its
//! per-dimension Gaussian densities,
//! `exp(mean_j(-0.5 ln(2 pi var_j) - (s_j - mu_j)^2 / (2 var_j)))`, which
//! keeps scores comparable across dimensionalities. The threshold is the
//! `ceil(0.9 n)`-th largest score among the period's own samples, so at
//! least 90% of them pass by construction.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi_pipeline::FilterSpec;
use crate::features::{fit_normalizer, fit_pca, FeatureError, Normalizer, PcaModel};

/// Variance floor in normalized units.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Fraction of a period's own samples that must pass its threshold.
pub const THRESHOLD_QUANTILE: f64 = 0.9;
/// Minimum samples to fit a period.
pub const MIN_PERIOD_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("profile has no periods")]
    NoPeriods,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("profile format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Diagonal Gaussian model of one recording period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodModel {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub threshold: f64,
    pub sample_count: usize,
}

impl PeriodModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Natural log of [`score`](Self::score).
    pub fn log_score(&self, s: &[f64]) -> Result<f64, MatchError> {
        if s.len() != self.mean.len() {
            return Err(MatchError::DimensionMismatch {
                expected: self.mean.len(),
                got: s.len(),
            });
        }
        let sum: f64 = s
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(x, (mu, var))| -0.5 * (2.0 * PI * var).ln() - (x - mu).powi(2) / (2.0 * var))
            .sum();
        Ok(sum / s.len() as f64)
    }

    /// Geometric mean of the per-dimension Gaussian densities of `s`.
    pub fn score(&self, s: &[f64]) -> Result<f64, MatchError> {
        self.log_score(s).map(f64::exp)
    }
}

/// `ceil(0.9 n)`.
pub fn threshold_rank(n: usize) -> usize {
    (9 * n).div_ceil(10)
}

/// Fits mean, floored variance and the 90% self-score threshold.
pub fn fit_period<S: AsRef<[f64]>>(samples: &[S]) -> Result<PeriodModel, MatchError> {
    let n = samples.len();
    if n < MIN_PERIOD_SAMPLES {
        return Err(MatchError::InsufficientSamples {
            needed: MIN_PERIOD_SAMPLES,
            got: n,
        });
    }
    let m = samples[0].as_ref().len();
    let mut mean = vec![0.0; m];
    for s in samples {
        let s = s.as_ref();
        if s.len() != m {
            return Err(MatchError::DimensionMismatch { expected: m, got: s.len() });
        }
        for (acc, v) in mean.iter_mut().zip(s) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut variance = vec![0.0; m];
    for s in samples {
        for ((acc, v), mu) in variance.iter_mut().zip(s.as_ref()).zip(&mean) {
            *acc += (v - mu).powi(2);
        }
    }
    variance
        .iter_mut()
        .for_each(|v| *v = (*v / n as f64).max(VARIANCE_FLOOR));

    let mut model = PeriodModel {
        mean,
        variance,
        threshold: 0.0,
        sample_count: n,
    };
    let mut scores = samples
        .iter()
        .map(|s| model.score(s.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_unstable_by(|a, b| b.total_cmp(a));
    model.threshold = scores[threshold_rank(n) - 1];
    Ok(model)
}

/// Outcome of matching one sample against every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision {
    pub accepted: bool,
    pub per_period_scores: Vec<f64>,
    /// Period with the largest score-to-threshold ratio.
    pub best_period: usize,
}

impl AuthDecision {
    pub fn best_score(&self) -> f64 {
        self.per_period_scores[self.best_period]
    }
}

/// OR decision over already-transformed sample `z`.
pub fn decide(periods: &[PeriodModel], z: &[f64]) -> Result<AuthDecision, MatchError> {
    if periods.is_empty() {
        return Err(MatchError::NoPeriods);
    }
    let mut per_period_scores = Vec::with_capacity(periods.len());
    let mut accepted = false;
    let mut best_period = 0;
    let mut best_margin = f64::NEG_INFINITY;
    for (i, p) in periods.iter().enumerate() {
        let log_score = p.log_score(z)?;
        let score = log_score.exp();
        accepted |= score >= p.threshold;
        let margin = log_score - p.threshold.ln();
        if margin > best_margin {
            best_margin = margin;
            best_period = i;
        }
        per_period_scores.push(score);
    }
    Ok(AuthDecision {
        accepted,
        per_period_scores,
        best_period,
    })
}

/// Settings that shape a registration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationOptions {
    pub period_secs: f64,
    pub window_s: f64,
    /// Variance fraction kept by PCA.
    pub retain: f64,
    pub filter: FilterSpec,
    pub created_at_us: u64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            period_secs: 30.0,
            window_s: 1.0,
            retain: 0.9,
            filter: FilterSpec::default(),
            created_at_us: 0,
        }
    }
}

/// A registered legal user: feature transform plus per-period models,
/// oldest period first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredProfile {
    pub t: usize,
    pub period_secs: f64,
    pub window_s: f64,
    pub created_at_us: u64,
    pub filter: FilterSpec,
    pub pca: PcaModel,
    pub normalizer: Normalizer,
    pub periods: Vec<PeriodModel>,
}

impl RegisteredProfile {
    /// Fits PCA and the normalizer on the union of all periods' raw
    /// features, then one [`PeriodModel`] per period on transformed samples.
    pub fn register<S: AsRef<[f64]>>(
        period_samples: &[Vec<S>],
        options: &RegistrationOptions,
    ) -> Result<Self, MatchError> {
        if period_samples.is_empty() {
            return Err(MatchError::NoPeriods);
        }
        if let Some(short) = period_samples.iter().find(|p| p.len() < MIN_PERIOD_SAMPLES) {
            return Err(MatchError::InsufficientSamples {
                needed: MIN_PERIOD_SAMPLES,
                got: short.len(),
            });
        }
        let union: Vec<&[f64]> = period_samples
            .iter()
            .flat_map(|p| p.iter().map(AsRef::as_ref))
            .collect();
        let pca = fit_pca(&union, options.retain)?;
        let projected = union
            .iter()
            .map(|s| pca.project(s))
            .collect::<Result<Vec<_>, _>>()?;
        let normalizer = fit_normalizer(&projected)?;

        let mut periods = Vec::with_capacity(period_samples.len());
        let mut offset = 0;
        for p in period_samples {
            let transformed = projected[offset..offset + p.len()]
                .iter()
                .map(|z| normalizer.apply(z))
                .collect::<Result<Vec<_>, _>>()?;
            offset += p.len();
            periods.push(fit_period(&transformed)?);
        }
        Ok(Self {
            t: periods.len(),
            period_secs: options.period_secs,
            window_s: options.window_s,
            created_at_us: options.created_at_us,
            filter: options.filter,
            pca,
            normalizer,
            periods,
        })
    }

    /// Raw feature dimension expected by the profile.
    pub fn input_dim(&self) -> usize {
        self.pca.input_dim()
    }

    /// Matching-space dimension.
    pub fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    /// PCA projection followed by normalization.
    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>, MatchError> {
        let z = self.pca.project(raw)?;
        Ok(self.normalizer.apply(&z)?)
    }

    pub fn authenticate(&self, raw: &[f64]) -> Result<AuthDecision, MatchError> {
        decide(&self.periods, &self.transform(raw)?)
    }

    /// Replaces the oldest period with one fitted on `latest` raw samples,
    /// keeping the feature transform frozen.
    pub fn updated<S: AsRef<[f64]>>(&self, latest: &[S]) -> Result<Self, MatchError> {
        if latest.len() < MIN_PERIOD_SAMPLES {
            return Err(MatchError::InsufficientSamples {
                needed: MIN_PERIOD_SAMPLES,
                got: latest.len(),
            });
        }
        let transformed = latest
            .iter()
            .map(|s| self.transform(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let fresh = fit_period(&transformed)?;
        let mut next = self.clone();
        next.periods.remove(0);
        next.periods.push(fresh);
        Ok(next)
    }

    pub fn to_json(&self) -> Result<String, MatchError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MatchError> {
        let profile: Self = serde_json::from_str(text)?;
        profile.check()?;
        Ok(profile)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MatchError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MatchError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), MatchError> {
        if self.periods.is_empty() {
            return Err(MatchError::NoPeriods);
        }
        let m = self.normalizer.dim();
        let k = self.pca.retained();
        if self.normalizer.max.len() != m || k != m {
            return Err(MatchError::DimensionMismatch { expected: k, got: m });
        }
        for p in &self.periods {
            if p.mean.len() != m || p.variance.len() != m {
                return Err(MatchError::DimensionMismatch {
                    expected: m,
                    got: p.mean.len(),
                });
            }
        }
        if self.t != self.periods.len() {
            return Err(MatchError::DimensionMismatch {
                expected: self.t,
                got: self.periods.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit(m: usize) -> PeriodModel {
        PeriodModel {
            mean: vec![0.0; m],
            variance: vec![1.0; m],
            threshold: 0.0,
            sample_count: 10,
        }
    }

    fn cluster(center: &[f64], spread: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }

    /// Direct product of densities followed by the m-th root.
    fn direct_score(p: &PeriodModel, s: &[f64]) -> f64 {
        let product: f64 = s
            .iter()
            .zip(p.mean.iter().zip(&p.variance))
            .map(|(x, (mu, v))| (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            .product();
        product.powf(1.0 / s.len() as f64)
    }

    #[test]
    fn score_closed_forms() {
        for m in [1, 10, 480] {
            let p = unit(m);
            assert!((p.score(&vec![0.0; m]).unwrap() - 0.398_942).abs() < 1e-6);
            let one_sigma = p.score(&vec![1.0; m]).unwrap();
            assert!((one_sigma - 0.241_971).abs() < 1e-6);
        }
        assert!(unit(3).score(&[0.0; 2]).is_err());
    }

    #[test]
    fn score_decreases_away_from_mean() {
        let p = unit(4);
        let mut prev = p.score(&[0.0; 4]).unwrap();
        for step in 1..20 {
            let s = [0.0, step as f64 * 0.3, 0.0, 0.0];
            let cur = p.score(&s).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn threshold_rank_rounds_up() {
        assert_eq!(threshold_rank(100), 90);
        assert_eq!(threshold_rank(10), 9);
        assert_eq!(threshold_rank(30), 27);
        assert_eq!(threshold_rank(11), 10);
    }

    #[test]
    fn fit_period_identical_samples() {
        let samples = vec![vec![0.5, -0.25]; 10];
        let p = fit_period(&samples).unwrap();
        assert_eq!(p.variance, vec![VARIANCE_FLOOR; 2]);
        assert_eq!(p.threshold, p.score(&samples[0]).unwrap());
        assert_eq!(p.sample_count, 10);
    }

    #[test]
    fn fit_period_needs_ten_samples() {
        assert!(matches!(
            fit_period(&vec![vec![0.0]; 9]),
            Err(MatchError::InsufficientSamples { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn threshold_picks_ninetieth_largest() {
        // 1-D samples with distinct distances from the mean give distinct scores;
        // the 90th largest of 100 must be the threshold.
        let samples: Vec<Vec<f64>> = (0..100).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 } * i as f64]).collect();
        let p = fit_period(&samples).unwrap();
        let mut scores: Vec<f64> = samples.iter().map(|s| p.score(s).unwrap()).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(p.threshold, scores[89]);
        let passing = scores.iter().filter(|s| **s >= p.threshold).count();
        assert!(passing >= 90);
    }

    #[test]
    fn gaussian_cluster_self_acceptance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [10, 17, 30, 101] {
            let samples = cluster(&[0.2, -0.4, 0.0, 0.7], 0.1, n, &mut rng);
            let p = fit_period(&samples).unwrap();
            let passing = samples.iter().filter(|s| p.score(s).unwrap() >= p.threshold).count();
            assert!(passing >= threshold_rank(n), "n={n}");
        }
    }

    fn four_periods(rng: &mut ChaCha8Rng) -> (Vec<[f64; 3]>, Vec<PeriodModel>) {
        let centers = vec![[0.6, 0.6, 0.0], [-0.6, 0.6, 0.0], [-0.6, -0.6, 0.0], [0.6, -0.6, 0.0]];
        let periods = centers
            .iter()
            .map(|c| fit_period(&cluster(c, 0.05, 30, rng)).unwrap())
            .collect();
        (centers, periods)
    }

    #[test]
    fn or_decision_reports_the_passing_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (centers, periods) = four_periods(&mut rng);
        let d = decide(&periods, &centers[2]).unwrap();
        assert!(d.accepted);
        assert_eq!(d.best_period, 2);
        assert!(d.per_period_scores[2] >= periods[2].threshold);
        for i in [0, 1, 3] {
            assert!(d.per_period_scores[i] < periods[i].threshold);
        }
        let far = decide(&periods, &[10.0, 10.0, 10.0]).unwrap();
        assert!(!far.accepted);
        assert!(decide(&[], &[0.0]).is_err());
    }

    #[test]
    fn log_and_direct_scores_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = cluster(&[0.0; 6], 0.3, 40, &mut rng);
        let p = fit_period(&samples).unwrap();
        for s in cluster(&[0.1; 6], 0.5, 200, &mut rng) {
            let a = p.score(&s).unwrap();
            let b = direct_score(&p, &s);
            assert!(((a - b) / b).abs() < 1e-9);
        }
    }

    fn raw_periods(rng: &mut ChaCha8Rng, centers: &[Vec<f64>], n: usize) -> Vec<Vec<Vec<f64>>> {
        centers.iter().map(|c| cluster(c, 0.2, n, rng)).collect()
    }

    fn centers(t: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|i| (0..dim).map(|j| if j % t == i { 4.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn register_separated_periods() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = centers(4, 8);
        let data = raw_periods(&mut rng, &c, 30);
        let profile = RegisteredProfile::register(&data, &RegistrationOptions::default()).unwrap();
        assert_eq!(profile.t, 4);
        for (i, a) in profile.periods.iter().enumerate() {
            for b in &profile.periods[i + 1..] {
                let dist: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
                assert!(dist > 0.1);
            }
        }
        let mut accepted = 0;
        for (i, period) in data.iter().enumerate() {
            let own = period
                .iter()
                .filter(|s| profile.authenticate(s).unwrap().best_period == i)
                .count();
            assert!(own > period.len() / 2);
            accepted += period.iter().filter(|s| profile.authenticate(s).unwrap().accepted).count();
        }
        assert!(accepted as f64 / 120.0 >= 0.9);
    }

    #[test]
    fn single_period_registration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = raw_periods(&mut rng, &centers(1, 5), 30);
        let profile = RegisteredProfile::register(&data, &RegistrationOptions::default()).unwrap();
        assert_eq!(profile.t, 1);
        let rate = data[0].iter().filter(|s| profile.authenticate(s).unwrap().accepted).count();
        assert!(rate >= 27);
    }

    #[test]
    fn register_errors() {
        let none: Vec<Vec<Vec<f64>>> = vec![];
        assert!(RegisteredProfile::register(&none, &RegistrationOptions::default()).is_err());
        let short = vec![vec![vec![0.0, 1.0]; 9]];
        assert!(RegisteredProfile::register(&short, &RegistrationOptions::default()).is_err());
    }

    #[test]
    fn update_slides_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = centers(4, 8);
        let data = raw_periods(&mut rng, &c, 30);
        let mut profile = RegisteredProfile::register(&data, &RegistrationOptions::default()).unwrap();
        let pca = profile.pca.clone();
        for round in 0..6 {
            let latest = &data[round % 4];
            let next = profile.updated(latest).unwrap();
            assert_eq!(next.t, 4);
            assert_eq!(next.periods.len(), 4);
            assert_eq!(next.periods[..3], profile.periods[1..]);
            assert_eq!(next.pca, pca);
            profile = next;
        }
        assert!(matches!(
            profile.updated(&data[0][..5]),
            Err(MatchError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn update_with_duplicate_period_keeps_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data = raw_periods(&mut rng, &centers(4, 8), 30);
        let profile = RegisteredProfile::register(&data, &RegistrationOptions::default()).unwrap();
        // re-fitting period 1 on its own data and dropping period 0
        let next = profile.updated(&data[1]).unwrap();
        assert_eq!(next.periods[3], profile.periods[1]);
        for s in data[1].iter().chain(&data[2]) {
            let z = profile.transform(s).unwrap();
            let by_one = profile.periods[1].score(&z).unwrap() >= profile.periods[1].threshold;
            if by_one {
                assert!(next.authenticate(s).unwrap().accepted);
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data = raw_periods(&mut rng, &centers(2, 6), 15);
        let profile = RegisteredProfile::register(&data, &RegistrationOptions::default()).unwrap();
        let back = RegisteredProfile::from_json(&profile.to_json().unwrap()).unwrap();
        assert_eq!(back, profile);
        assert!(RegisteredProfile::from_json("{}").is_err());
    }

    proptest! {
        #[test]
        fn score_invariant_under_dimension_permutation(
            s in prop::collection::vec(-2.0f64..2.0, 5),
            shift in 0usize..5,
        ) {
            let p = PeriodModel {
                mean: vec![0.1, -0.3, 0.5, 0.0, 0.9],
                variance: vec![0.5, 1.5, 0.2, 1.0, 0.05],
                threshold: 0.1,
                sample_count: 10,
            };
            let rot = |v: &[f64]| -> Vec<f64> { (0..5).map(|i| v[(i + shift) % 5]).collect() };
            let q = PeriodModel {
                mean: rot(&p.mean),
                variance: rot(&p.variance),
                ..p.clone()
            };
            let a = p.score(&s).unwrap();
            let b = q.score(&rot(&s)).unwrap();
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }

        #[test]
        fn acceptance_is_monotone_in_scores(s in prop::collection::vec(-1.5f64..1.5, 3), pull in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let (centers, periods) = four_periods(&mut rng);
            let d = decide(&periods, &s).unwrap();
            // moving toward the best period's mean raises that period's score
            let target = &periods[d.best_period].mean;
            let closer: Vec<f64> = s.iter().zip(target).map(|(x, m)| x + pull * (m - x)).collect();
            let d2 = decide(&periods, &closer).unwrap();
            prop_assert!(d2.per_period_scores[d.best_period] >= d.per_period_scores[d.best_period]);
            if d.accepted {
                prop_assert!(d2.accepted);
            }
            let _ = centers;
        }
    }
}
