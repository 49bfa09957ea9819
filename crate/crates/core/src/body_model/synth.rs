use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{channel_response, ModelError, Scene};
use crate::csi_pipeline::{wrap_phase, CsiFrame, CsiSeries};

/// Synthesizes `duration_s` of CSI for a static scene.
///
/// Per packet, the sampling-offset and boundary-detection phase errors are
/// drawn once and shared by all subcarriers; the measurement error and the
/// amplitude jitter are drawn per subcarrier. The clock offset adds a phase
/// ramp of `2 pi f_k cfo_delta_t` per second of capture, and a slow sinusoid
/// modulates all amplitudes to mimic seated micro-motion. Phases are
/// reported wrapped into `(-pi, pi]`. Output depends only on the scene
/// (including its seed) and the duration.
pub fn synthesize_csi(scene: &Scene, duration_s: f64) -> Result<CsiSeries, ModelError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(ModelError::InvalidInput(format!("duration {duration_s} s")));
    }
    let h = channel_response(scene)?;
    let count = (duration_s * scene.rate_hz).round() as usize;
    if count == 0 {
        return Err(ModelError::InvalidInput(format!(
            "duration {duration_s} s holds no packet at {} Hz",
            scene.rate_hz
        )));
    }
    let freqs = scene.subcarrier_freqs();
    let base_amp: Vec<f64> = h.iter().map(|c| c.norm() * scene.rx_gain).collect();
    let base_phase: Vec<f64> = h.iter().map(|c| c.arg()).collect();
    let ramp_per_packet: Vec<f64> = freqs
        .iter()
        .map(|f| 2.0 * PI * f * scene.noise.cfo_delta_t / scene.rate_hz)
        .collect();

    let noise = &scene.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let motion_phase = rng.gen_range(0.0..2.0 * PI);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 / scene.rate_hz;
        let motion = noise.motion_amp * (2.0 * PI * noise.motion_freq_hz * t + motion_phase).sin();
        let packet_offset = noise.sigma_s * normal() + noise.sigma_b * normal();
        let mut amplitudes = Vec::with_capacity(h.len());
        let mut phases = Vec::with_capacity(h.len());
        for k in 0..h.len() {
            let jitter = noise.amp_jitter_sigma * normal();
            let measurement = noise.sigma_m * normal();
            amplitudes.push((base_amp[k] * (1.0 + jitter) * (1.0 + motion)).max(0.0));
            let ramp = wrap_phase(ramp_per_packet[k] * i as f64);
            phases.push(wrap_phase(base_phase[k] + packet_offset + measurement + ramp));
        }
        frames.push(CsiFrame {
            timestamp_us: (i as f64 * 1.0e6 / scene.rate_hz).round() as u64,
            amplitudes,
            phases,
        });
    }
    Ok(CsiSeries {
        rate_hz: scene.rate_hz,
        frames,
    })
}
