use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Principal-component basis fitted on raw feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal component rows, largest variance first.
    pub basis: Vec<Vec<f64>>,
    /// Sample variance along each retained component.
    pub variances: Vec<f64>,
    /// Total sample variance of the fitting data.
    pub total_variance: f64,
    /// Requested retained-variance fraction.
    pub retain: f64,
}

/// Fits PCA and keeps the fewest leading components whose cumulative
/// variance reaches `retain` of the total.
///
/// Each component is signed so that its largest-magnitude entry is positive.
pub fn fit_pca<S: AsRef<[f64]>>(samples: &[S], retain: f64) -> Result<PcaModel, FeatureError> {
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(FeatureError::Invalid(format!("retain {retain} outside (0, 1]")));
    }
    let n = samples.len();
    if n < 2 {
        return Err(FeatureError::TooFewSamples { needed: 2, got: n });
    }
    let d = samples[0].as_ref().len();
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != d) {
        return Err(FeatureError::DimensionMismatch {
            expected: d,
            got: bad.as_ref().len(),
        });
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| samples[i].as_ref()[j] - mean[j]);
    let dof = (n - 1) as f64;
    let total_variance = centered.norm_squared() / dof;
    if total_variance.is_nan() || total_variance <= 0.0 {
        return Err(FeatureError::ConstantData);
    }

    // eigen-decompose whichever of the covariance and Gram matrices is smaller
    let (eigenvalues, components): (Vec<f64>, Vec<DVector<f64>>) = if d <= n {
        let eig = SymmetricEigen::new(centered.transpose() * &centered / dof);
        let order = descending(&eig.eigenvalues);
        (
            order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
        )
    } else {
        let eig = SymmetricEigen::new(&centered * centered.transpose());
        let order = descending(&eig.eigenvalues);
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let comps = order
            .iter()
            .zip(&vals)
            .map(|(&i, &lambda)| {
                let u = eig.eigenvectors.column(i);
                centered.transpose() * u / lambda.max(f64::MIN_POSITIVE).sqrt()
            })
            .collect();
        (vals.into_iter().map(|l| l / dof).collect(), comps)
    };

    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let tol = top * (n.max(d) as f64) * f64::EPSILON * 16.0;
    let rank = eigenvalues.iter().take_while(|&&l| l > tol).count();
    if rank == 0 {
        return Err(FeatureError::ConstantData);
    }
    let target = retain * total_variance * (1.0 - 1e-10);
    let mut cumulative = 0.0;
    let mut k = rank;
    for (i, l) in eigenvalues.iter().take(rank).enumerate() {
        cumulative += l;
        if cumulative >= target {
            k = i + 1;
            break;
        }
    }

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for c in components.into_iter().take(k) {
        // re-orthonormalise against the kept rows (modified Gram-Schmidt)
        let mut v = c;
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        v /= v.norm();
        let pivot = v.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v = -v;
        }
        basis.push(v);
    }

    Ok(PcaModel {
        mean,
        basis: basis.iter().map(|v| v.iter().copied().collect()).collect(),
        variances: eigenvalues[..k].to_vec(),
        total_variance,
        retain,
    })
}

fn descending(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn retained(&self) -> usize {
        self.basis.len()
    }

    /// Fraction of the fitting data's variance kept by the basis.
    pub fn retained_fraction(&self) -> f64 {
        self.variances.iter().sum::<f64>() / self.total_variance
    }

    /// Coordinates `(v - mean) * basis^T`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if v.len() != self.mean.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.mean.len(),
                got: v.len(),
            });
        }
        Ok(self
            .basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(b, (x, m))| b * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Maps reduced coordinates back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if z.len() != self.basis.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.basis.len(),
                got: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (row, c) in self.basis.iter().zip(z) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        Ok(out)
    }
}
