//! Concentric-circle electromagnetic body model.
//!
//! A person is abstracted as nested tissue layers. A Wi-Fi copy that passes
//! through the body is attenuated by every layer's power decay and delayed
//! by `d * sqrt(mu * eps)` per traversed length `d`. The body-dependent part
//! of the received copy is
//!
//! ```text
//! prod(c_i) * exp(-j 2 pi f sum_i (d_i1 + d_i2) sqrt(mu_i eps_i))
//! ```
//!
//! and the free-space part is `c1 * c2 * exp(-j 2 pi f (l1 + l2) sqrt(mu0 eps0))`.
//! [`synthesize_csi`] turns a [`Scene`] of such bodies into a noisy CSI
//! stream so the rest of the pipeline can run without radio hardware.

mod presets;
mod scene_file;
mod synth;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use presets::{default_profile, synthetic_subject, synthetic_subject_scene};
pub use scene_file::{parse_scene, read_scene_file};
pub use synth::synthesize_csi;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("non-finite or out-of-range input: {0}")]
    InvalidInput(String),
    #[error("ray misses body: offset {offset_m} m >= outer radius {radius_m} m")]
    RayMissesBody { offset_m: f64, radius_m: f64 },
    #[error("singular air decay: distance {0} m")]
    SingularDecay(f64),
    #[error("path lengths ({got}) do not match layer count ({layers})")]
    PathMismatch { got: usize, layers: usize },
    #[error("scene has no subcarriers")]
    NoSubcarriers,
    #[error("scene config line {line}: {msg}")]
    Config { line: usize, msg: String },
}

/// One tissue layer, bounded on the outside by `radius_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueLayer {
    pub name: String,
    pub radius_m: f64,
    pub rel_permittivity: f64,
    pub rel_permeability: f64,
    /// Power decay factor per traversal, in `(0, 1]`.
    pub decay_c: f64,
}

impl TissueLayer {
    pub fn new(name: &str, radius_m: f64, rel_permittivity: f64, decay_c: f64) -> Self {
        Self {
            name: name.to_string(),
            radius_m,
            rel_permittivity,
            rel_permeability: 1.0,
            decay_c,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let ok = self.radius_m.is_finite()
            && self.radius_m > 0.0
            && self.rel_permittivity.is_finite()
            && self.rel_permittivity >= 1.0
            && self.rel_permeability.is_finite()
            && self.rel_permeability > 0.0
            && self.decay_c > 0.0
            && self.decay_c <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidInput(format!("tissue layer {:?}", self.name)))
        }
    }
}

/// Ordered tissue layers, innermost first. Zero layers is a transparent body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyProfile {
    pub label: String,
    pub layers: Vec<TissueLayer>,
}

impl BodyProfile {
    pub fn new(label: &str, layers: Vec<TissueLayer>) -> Result<Self, ModelError> {
        let profile = Self {
            label: label.to_string(),
            layers,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn transparent(label: &str) -> Self {
        Self {
            label: label.to_string(),
            layers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for layer in &self.layers {
            layer.validate()?;
        }
        if self.layers.windows(2).any(|w| w[1].radius_m <= w[0].radius_m) {
            return Err(ModelError::InvalidInput(format!(
                "layer radii of {:?} must strictly increase outward",
                self.label
            )));
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.radius_m)
    }

    /// Product of all layer decays.
    pub fn total_decay(&self) -> f64 {
        self.layers.iter().map(|l| l.decay_c).product()
    }
}

/// Placement of one body relative to the transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGeometry {
    pub l1_m: f64,
    pub l2_m: f64,
    pub offset_b_m: f64,
    pub in_lengths_m: Vec<f64>,
    pub out_lengths_m: Vec<f64>,
}

impl PathGeometry {
    /// Geometry of a straight ray crossing `profile` at perpendicular offset `offset_b_m`.
    pub fn through(
        profile: &BodyProfile,
        l1_m: f64,
        l2_m: f64,
        offset_b_m: f64,
    ) -> Result<Self, ModelError> {
        if !(l1_m > 0.0 && l2_m > 0.0 && l1_m.is_finite() && l2_m.is_finite()) {
            return Err(ModelError::InvalidInput(format!("distances l1={l1_m}, l2={l2_m}")));
        }
        let (in_lengths_m, out_lengths_m) = if profile.layers.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            derive_path_lengths(profile, offset_b_m)?
        };
        Ok(Self {
            l1_m,
            l2_m,
            offset_b_m,
            in_lengths_m,
            out_lengths_m,
        })
    }
}

/// Vacuum constants and the free-space decay law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirConstants {
    /// Vacuum permeability, H/m.
    pub mu0: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Exponent applied to the Friis amplitude ratio `lambda / (4 pi l)`.
    pub decay_exponent: f64,
}

impl Default for AirConstants {
    fn default() -> Self {
        Self {
            mu0: 1.256_637_062_12e-6,
            eps0: 8.854_187_812_8e-12,
            decay_exponent: 1.0,
        }
    }
}

impl AirConstants {
    pub fn wave_speed(&self) -> f64 {
        1.0 / (self.mu0 * self.eps0).sqrt()
    }

    pub fn wavelength(&self, freq_hz: f64) -> f64 {
        self.wave_speed() / freq_hz
    }

    /// Free-space amplitude decay over `distance_m`.
    pub fn decay(&self, distance_m: f64, freq_hz: f64) -> Result<f64, ModelError> {
        if !distance_m.is_finite() || distance_m <= 0.0 {
            return Err(ModelError::SingularDecay(distance_m));
        }
        Ok((self.wavelength(freq_hz) / (4.0 * PI * distance_m)).powf(self.decay_exponent))
    }
}

/// Per-packet phase and amplitude disturbances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Sampling-frequency-offset phase error std, rad (per packet).
    pub sigma_s: f64,
    /// Packet-boundary-detection phase error std, rad (per packet).
    pub sigma_b: f64,
    /// Measurement phase error std, rad (per packet and subcarrier).
    pub sigma_m: f64,
    /// Receiver clock offset accumulated per second of capture, s/s.
    pub cfo_delta_t: f64,
    /// Relative amplitude noise std.
    pub amp_jitter_sigma: f64,
    /// Relative depth of the slow body micro-motion modulation.
    pub motion_amp: f64,
    pub motion_freq_hz: f64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            sigma_s: 0.0,
            sigma_b: 0.0,
            sigma_m: 0.0,
            cfo_delta_t: 0.0,
            amp_jitter_sigma: 0.0,
            motion_amp: 0.0,
            motion_freq_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let stds = [
            self.sigma_s,
            self.sigma_b,
            self.sigma_m,
            self.amp_jitter_sigma,
            self.motion_amp,
        ];
        if stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(ModelError::InvalidInput("noise std must be finite and >= 0".into()));
        }
        if !self.cfo_delta_t.is_finite() {
            return Err(ModelError::InvalidInput("cfo_delta_t must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.motion_freq_hz) {
            return Err(ModelError::InvalidInput(format!(
                "motion_freq_hz {} must be in [0, 1)",
                self.motion_freq_hz
            )));
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_s: 0.04,
            sigma_b: 0.04,
            sigma_m: 0.08,
            // about 0.1 rad of drift per packet at 5 GHz and 50 Hz
            cfo_delta_t: 1.6e-10,
            amp_jitter_sigma: 0.04,
            motion_amp: 0.015,
            motion_freq_hz: 0.2,
        }
    }
}

/// A body placed in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBody {
    pub profile: BodyProfile,
    pub geometry: PathGeometry,
}

/// Everything needed to synthesize a CSI stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub carrier_hz: f64,
    pub subcarrier_offsets_hz: Vec<f64>,
    pub rate_hz: f64,
    pub bodies: Vec<SceneBody>,
    pub los_path_m: f64,
    /// Scale from channel coefficient to reported CSI amplitude units.
    pub rx_gain: f64,
    pub air: AirConstants,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// `count` offsets evenly spaced across `bandwidth_hz`, centred on the carrier.
pub fn even_subcarrier_offsets(count: usize, bandwidth_hz: f64) -> Vec<f64> {
    let step = bandwidth_hz / count as f64;
    (0..count)
        .map(|k| (k as f64 - (count as f64 - 1.0) / 2.0) * step)
        .collect()
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            carrier_hz: 5.0e9,
            subcarrier_offsets_hz: even_subcarrier_offsets(30, 20.0e6),
            rate_hz: 50.0,
            bodies: Vec::new(),
            los_path_m: 2.0,
            rx_gain: 1.0e7,
            air: AirConstants::default(),
            noise: NoiseModel::default(),
            seed: 0,
        }
    }
}

impl Scene {
    pub fn subcarrier_freqs(&self) -> Vec<f64> {
        self.subcarrier_offsets_hz
            .iter()
            .map(|o| self.carrier_hz + o)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.subcarrier_offsets_hz.is_empty() {
            return Err(ModelError::NoSubcarriers);
        }
        let positive = [self.carrier_hz, self.rate_hz, self.los_path_m, self.rx_gain];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ModelError::InvalidInput(
                "carrier_hz, rate_hz, los_path_m and rx_gain must be positive".into(),
            ));
        }
        if self.subcarrier_freqs().iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(ModelError::InvalidInput("subcarrier frequency <= 0".into()));
        }
        self.noise.validate()?;
        for body in &self.bodies {
            body.profile.validate()?;
        }
        Ok(())
    }
}

/// Transmitted baseband sample `A exp(-j 2 pi f t + j phi0)`.
pub fn transmit_sample(
    amplitude: f64,
    freq_hz: f64,
    phase0: f64,
    t: f64,
) -> Result<Complex64, ModelError> {
    if ![amplitude, freq_hz, phase0, t].iter().all(|v| v.is_finite()) {
        return Err(ModelError::InvalidInput("non-finite transmit parameter".into()));
    }
    if !(amplitude > 0.0 && freq_hz > 0.0) {
        return Err(ModelError::InvalidInput("amplitude and frequency must be > 0".into()));
    }
    Ok(Complex64::from_polar(amplitude, -2.0 * PI * freq_hz * t + phase0))
}

/// Per-layer entry (`in`) and exit (`out`) chord lengths of a straight ray at
/// perpendicular offset `offset_b_m` from the body centre, innermost first.
pub fn derive_path_lengths(
    profile: &BodyProfile,
    offset_b_m: f64,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    if !offset_b_m.is_finite() || offset_b_m < 0.0 {
        return Err(ModelError::InvalidInput(format!("offset {offset_b_m}")));
    }
    let outer = profile.outer_radius();
    if offset_b_m >= outer {
        return Err(ModelError::RayMissesBody {
            offset_m: offset_b_m,
            radius_m: outer,
        });
    }
    let b2 = offset_b_m * offset_b_m;
    // half-chord inside radius r; zero for circles the ray does not reach
    let half_chord = |r: f64| if r > offset_b_m { (r * r - b2).sqrt() } else { 0.0 };
    let mut inner = 0.0;
    let lengths: Vec<f64> = profile
        .layers
        .iter()
        .map(|layer| {
            let outer_half = half_chord(layer.radius_m);
            let seg = outer_half - inner;
            inner = outer_half;
            seg
        })
        .collect();
    Ok((lengths.clone(), lengths))
}

/// Body-dependent factor of the received copy.
pub fn body_coefficient(
    profile: &BodyProfile,
    geometry: &PathGeometry,
    freq_hz: f64,
    air: &AirConstants,
) -> Result<Complex64, ModelError> {
    let n = profile.layers.len();
    if geometry.in_lengths_m.len() != n || geometry.out_lengths_m.len() != n {
        return Err(ModelError::PathMismatch {
            got: geometry.in_lengths_m.len().max(geometry.out_lengths_m.len()),
            layers: n,
        });
    }
    let mut delay = 0.0;
    for ((layer, d_in), d_out) in profile
        .layers
        .iter()
        .zip(&geometry.in_lengths_m)
        .zip(&geometry.out_lengths_m)
    {
        let mu = layer.rel_permeability * air.mu0;
        let eps = layer.rel_permittivity * air.eps0;
        delay += (d_in + d_out) * (mu * eps).sqrt();
    }
    Ok(Complex64::from_polar(
        profile.total_decay(),
        -2.0 * PI * freq_hz * delay,
    ))
}

/// Free-space factor for the transmitter → body → receiver legs.
pub fn air_coefficient(
    l1_m: f64,
    l2_m: f64,
    freq_hz: f64,
    air: &AirConstants,
) -> Result<Complex64, ModelError> {
    let c1 = air.decay(l1_m, freq_hz)?;
    let c2 = air.decay(l2_m, freq_hz)?;
    let delay = (l1_m + l2_m) * (air.mu0 * air.eps0).sqrt();
    Ok(Complex64::from_polar(c1 * c2, -2.0 * PI * freq_hz * delay))
}

/// Line-of-sight term: the direct path split into two equal free-space legs.
pub fn los_coefficient(scene: &Scene, freq_hz: f64) -> Result<Complex64, ModelError> {
    let half = scene.los_path_m / 2.0;
    air_coefficient(half, half, freq_hz, &scene.air)
}

/// Noiseless per-subcarrier channel: LOS plus one additive copy per body.
pub fn channel_response(scene: &Scene) -> Result<Vec<Complex64>, ModelError> {
    scene.validate()?;
    scene
        .subcarrier_freqs()
        .into_iter()
        .map(|f| {
            let mut h = los_coefficient(scene, f)?;
            for body in &scene.bodies {
                h += air_coefficient(body.geometry.l1_m, body.geometry.l2_m, f, &scene.air)?
                    * body_coefficient(&body.profile, &body.geometry, f, &scene.air)?;
            }
            Ok(h)
        })
        .collect()
}
