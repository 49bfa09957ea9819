use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BodyProfile, PathGeometry, Scene, SceneBody, TissueLayer};

/// Six-layer torso cross-section, innermost first.
///
/// The permittivities are rough 5 GHz figures for each tissue type and the
/// decay factors are placeholders; both are meant to be overridden.
pub fn default_profile() -> BodyProfile {
    BodyProfile {
        label: "default".to_string(),
        layers: vec![
            TissueLayer::new("bone", 0.035, 11.7, 0.92),
            TissueLayer::new("viscera", 0.095, 48.0, 0.80),
            TissueLayer::new("visceral_fat", 0.110, 5.0, 0.97),
            TissueLayer::new("muscle", 0.135, 49.0, 0.82),
            TissueLayer::new("subcutaneous_fat", 0.150, 5.0, 0.97),
            TissueLayer::new("skin", 0.152, 36.0, 0.90),
        ],
    }
}

/// A reproducible variation of [`default_profile`] for subject number `index`.
///
/// Overall size, per-layer thickness, permittivity and decay are perturbed
/// independently, so distinct indices give distinct bodies.
pub fn synthetic_subject(index: u64) -> BodyProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_B0D7 ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let base = default_profile();
    let size = rng.gen_range(0.85..1.15);
    let mut inner = 0.0;
    let mut prev_base = 0.0;
    let layers = base
        .layers
        .iter()
        .map(|layer| {
            let thickness = (layer.radius_m - prev_base) * size * rng.gen_range(0.85..1.15);
            prev_base = layer.radius_m;
            inner += thickness;
            TissueLayer {
                name: layer.name.clone(),
                radius_m: inner,
                rel_permittivity: (layer.rel_permittivity * rng.gen_range(0.85..1.15)).max(1.0),
                rel_permeability: 1.0,
                decay_c: (layer.decay_c * rng.gen_range(0.94..1.06)).min(1.0),
            }
        })
        .collect();
    BodyProfile {
        label: format!("subject-{index}"),
        layers,
    }
}

/// Default scene with subject `index` seated beside the link.
pub fn synthetic_subject_scene(index: u64, seed: u64) -> Scene {
    let profile = synthetic_subject(index);
    let mut rng = ChaCha8Rng::seed_from_u64(index ^ 0xA11C_E5EA_7ED0_0000);
    let offset = rng.gen_range(0.0..0.03);
    let geometry = PathGeometry::through(&profile, 1.25, 1.25, offset)
        .expect("preset geometry is valid");
    Scene {
        bodies: vec![SceneBody { profile, geometry }],
        seed,
        ..Scene::default()
    }
}
