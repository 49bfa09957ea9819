use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Per-dimension affine map of the fitted `[min, max]` onto `[-1, +1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_normalizer<S: AsRef<[f64]>>(samples: &[S]) -> Result<Normalizer, FeatureError> {
    let first = samples
        .first()
        .ok_or(FeatureError::TooFewSamples { needed: 1, got: 0 })?
        .as_ref();
    let mut min = first.to_vec();
    let mut max = first.to_vec();
    for s in &samples[1..] {
        let s = s.as_ref();
        if s.len() != min.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: min.len(),
                got: s.len(),
            });
        }
        for ((lo, hi), v) in min.iter_mut().zip(max.iter_mut()).zip(s) {
            *lo = lo.min(*v);
            *hi = hi.max(*v);
        }
    }
    Ok(Normalizer { min, max })
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Normalizes `v`; values outside the fitted range clamp to `±1` and
    /// zero-range dimensions map to 0.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if v.len() != self.min.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.min.len(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(x, (lo, hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    (2.0 * (x - lo) / range - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}
