use std::f64::consts::PI;

use num_complex::Complex64;

use super::{FilterSpec, PipelineError};

/// Second-order section in transposed direct form II, `a0 = 1`.
///
/// First-order sections are stored with `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }

    /// Filter in place, starting from the steady state for a constant input `init`.
    fn run(&self, x: &mut [f64], init: f64) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // every section has unit DC gain, so the steady-state output equals init
        let mut s2 = (b2 - a2) * init;
        let mut s1 = (b1 - a1) * init + s2;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + s1;
            s1 = b1 * input - a1 * y + s2;
            s2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Digital low-pass Butterworth filter as a cascade of unit-DC-gain sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

/// Bilinear-transform Butterworth design with the cutoff prewarped.
pub fn design_butterworth(spec: &FilterSpec) -> Result<Butterworth, PipelineError> {
    spec.validate()?;
    let n = spec.order;
    let fs2 = 2.0 * spec.rate_hz;
    let warped = fs2 * (PI * spec.cutoff_hz / spec.rate_hz).tan();
    let bilinear = |p: Complex64| (fs2 + p) / (fs2 - p);

    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for k in 0..n / 2 {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let z = bilinear(Complex64::from_polar(warped, theta));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad {
            b: [g, 2.0 * g, g],
            a: [a1, a2],
        });
    }
    if n % 2 == 1 {
        let z = bilinear(Complex64::new(-warped, 0.0)).re;
        let g = (1.0 - z) / 2.0;
        sections.push(Biquad {
            b: [g, g, 0.0],
            a: [-z, 0.0],
        });
    }
    Ok(Butterworth {
        spec: *spec,
        sections,
    })
}

impl Butterworth {
    /// Complex gain at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.spec.rate_hz);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product()
    }

    pub fn gain(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Digital poles of the cascade.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut poles = Vec::new();
        for s in &self.sections {
            let [a1, a2] = s.a;
            if a2 == 0.0 {
                poles.push(Complex64::new(-a1, 0.0));
            } else {
                let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
                poles.push((-a1 + disc) / 2.0);
                poles.push((-a1 - disc) / 2.0);
            }
        }
        poles
    }

    /// Causal filtering, initialised at the steady state of `x[0]`.
    pub fn apply_causal(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if let Some(&first) = x.first() {
            for s in &self.sections {
                s.run(&mut y, first);
            }
        }
        y
    }

    /// Forward-backward filtering with odd-reflection edge padding.
    ///
    /// The result is averaged with the time-reversed run on the reversed input,
    /// so reversing the input exactly reverses the output.
    pub fn apply_zero_phase(&self, x: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let pad = self.spec.pad_len();
        if x.len() <= pad {
            return Err(PipelineError::SeriesTooShort {
                len: x.len(),
                needed: pad,
            });
        }
        let forward = self.forward_backward(x, pad);
        let mut reversed = x.to_vec();
        reversed.reverse();
        let backward = self.forward_backward(&reversed, pad);
        Ok(forward
            .iter()
            .zip(backward.iter().rev())
            .map(|(a, b)| 0.5 * (a + b))
            .collect())
    }

    fn forward_backward(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut y = self.apply_causal(&ext);
        y.reverse();
        let mut y = self.apply_causal(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase low-pass filtering of each series independently.
pub fn filter_series(series: &[Vec<f64>], spec: &FilterSpec) -> Result<Vec<Vec<f64>>, PipelineError> {
    let filter = design_butterworth(spec)?;
    series.iter().map(|s| filter.apply_zero_phase(s)).collect()
}
