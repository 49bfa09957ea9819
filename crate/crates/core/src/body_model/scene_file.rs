//! Line-oriented scene configuration.
//!
//! ```text
//! [scene]
//! carrier_hz = 5e9
//! subcarriers = 30
//! seed = 7
//!
//! [noise]
//! sigma_m = 0.05
//!
//! [body.0]
//! label = alice
//! l1_m = 1.25
//! l2_m = 1.25
//! offset_b_m = 0.01
//! preset = subject:3        # or `default`, or explicit [layer.0.M] sections
//!
//! [layer.1.0]               # body 1, innermost layer
//! radius_m = 0.1
//! rel_permittivity = 40
//! decay_c = 0.8
//! ```
//!
//! Unknown sections or keys, duplicates and malformed values are errors that
//! carry the offending line number.

use std::collections::BTreeMap;
use std::path::Path;

use super::{
    default_profile, even_subcarrier_offsets, synthetic_subject, BodyProfile, ModelError,
    PathGeometry, Scene, SceneBody, TissueLayer,
};

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
enum Section {
    Scene,
    Noise,
    Body(usize),
    Layer(usize, usize),
}

const SCENE_KEYS: &[&str] = &[
    "carrier_hz",
    "bandwidth_hz",
    "subcarriers",
    "subcarrier_offsets_hz",
    "rate_hz",
    "los_path_m",
    "rx_gain",
    "decay_exponent",
    "mu0",
    "eps0",
    "seed",
];
const NOISE_KEYS: &[&str] = &[
    "sigma_s",
    "sigma_b",
    "sigma_m",
    "cfo_delta_t",
    "amp_jitter_sigma",
    "motion_amp",
    "motion_freq_hz",
];
const BODY_KEYS: &[&str] = &["label", "l1_m", "l2_m", "offset_b_m", "preset"];
const LAYER_KEYS: &[&str] = &[
    "name",
    "radius_m",
    "rel_permittivity",
    "rel_permeability",
    "decay_c",
];

/// Key → (value, line).
type Entries = BTreeMap<String, (String, usize)>;

fn cfg_err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_section(name: &str, line: usize) -> Result<Section, ModelError> {
    let parts: Vec<&str> = name.split('.').collect();
    let index = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| cfg_err(line, format!("bad index {s:?} in section [{name}]")))
    };
    match parts.as_slice() {
        ["scene"] => Ok(Section::Scene),
        ["noise"] => Ok(Section::Noise),
        ["body", n] => Ok(Section::Body(index(n)?)),
        ["layer", n, m] => Ok(Section::Layer(index(n)?, index(m)?)),
        _ => Err(cfg_err(line, format!("unknown section [{name}]"))),
    }
}

fn allowed_keys(section: Section) -> &'static [&'static str] {
    match section {
        Section::Scene => SCENE_KEYS,
        Section::Noise => NOISE_KEYS,
        Section::Body(_) => BODY_KEYS,
        Section::Layer(..) => LAYER_KEYS,
    }
}

struct Reader<'a> {
    entries: &'a Entries,
    header_line: usize,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ModelError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(cfg_err(line, format!("key {key}: expected a number, got {v:?}"))),
            },
        }
    }

    fn required(&self, key: &str) -> Result<f64, ModelError> {
        self.f64(key)?
            .ok_or_else(|| cfg_err(self.header_line, format!("missing required key {key}")))
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, ModelError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| cfg_err(line, format!("key {key}: expected an integer, got {v:?}"))),
        }
    }
}

/// Parses a scene document.
pub fn parse_scene(text: &str) -> Result<Scene, ModelError> {
    let mut sections: BTreeMap<Section, (Entries, usize)> = BTreeMap::new();
    let mut current: Option<Section> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line_no, "unterminated section header"))?
                .trim();
            let section = parse_section(name, line_no)?;
            if sections.contains_key(&section) {
                return Err(cfg_err(line_no, format!("duplicate section [{name}]")));
            }
            sections.insert(section, (Entries::new(), line_no));
            current = Some(section);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(line_no, format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current.ok_or_else(|| cfg_err(line_no, format!("key {key} outside any section")))?;
        if !allowed_keys(section).contains(&key) {
            return Err(cfg_err(line_no, format!("unknown key {key}")));
        }
        let entries = &mut sections.get_mut(&section).expect("section registered").0;
        if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
            return Err(cfg_err(line_no, format!("duplicate key {key}")));
        }
    }

    let empty = Entries::new();
    let reader = |s: Section| {
        let (entries, header_line) = sections.get(&s).map_or((&empty, 0), |(e, l)| (e, *l));
        Reader {
            entries,
            header_line,
        }
    };

    let mut scene = Scene::default();
    let sc = reader(Section::Scene);
    if let Some(v) = sc.f64("carrier_hz")? {
        scene.carrier_hz = v;
    }
    if let Some(v) = sc.f64("rate_hz")? {
        scene.rate_hz = v;
    }
    if let Some(v) = sc.f64("los_path_m")? {
        scene.los_path_m = v;
    }
    if let Some(v) = sc.f64("rx_gain")? {
        scene.rx_gain = v;
    }
    if let Some(v) = sc.f64("decay_exponent")? {
        scene.air.decay_exponent = v;
    }
    if let Some(v) = sc.f64("mu0")? {
        scene.air.mu0 = v;
    }
    if let Some(v) = sc.f64("eps0")? {
        scene.air.eps0 = v;
    }
    if let Some(v) = sc.u64("seed")? {
        scene.seed = v;
    }
    let count = sc.u64("subcarriers")?.unwrap_or(30) as usize;
    let bandwidth = sc.f64("bandwidth_hz")?.unwrap_or(20.0e6);
    scene.subcarrier_offsets_hz = even_subcarrier_offsets(count, bandwidth);
    if let Some((list, line)) = sc.raw("subcarrier_offsets_hz") {
        scene.subcarrier_offsets_hz = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| cfg_err(line, "key subcarrier_offsets_hz: expected comma-separated numbers"))?;
    }
    if scene.subcarrier_offsets_hz.is_empty() {
        return Err(cfg_err(sc.header_line, "scene needs at least one subcarrier"));
    }

    let nz = reader(Section::Noise);
    let noise = &mut scene.noise;
    for (key, slot) in [
        ("sigma_s", &mut noise.sigma_s),
        ("sigma_b", &mut noise.sigma_b),
        ("sigma_m", &mut noise.sigma_m),
        ("cfo_delta_t", &mut noise.cfo_delta_t),
        ("amp_jitter_sigma", &mut noise.amp_jitter_sigma),
        ("motion_amp", &mut noise.motion_amp),
        ("motion_freq_hz", &mut noise.motion_freq_hz),
    ] {
        if let Some(v) = nz.f64(key)? {
            *slot = v;
        }
    }
    scene
        .noise
        .validate()
        .map_err(|e| cfg_err(nz.header_line, e.to_string()))?;

    let body_ids: Vec<usize> = sections
        .keys()
        .filter_map(|s| match s {
            Section::Body(n) => Some(*n),
            _ => None,
        })
        .collect();
    for (line, n) in sections.iter().filter_map(|(s, (_, l))| match s {
        Section::Layer(n, _) => Some((*l, *n)),
        _ => None,
    }) {
        if !body_ids.contains(&n) {
            return Err(cfg_err(line, format!("layer refers to missing [body.{n}]")));
        }
    }

    for n in body_ids {
        let br = reader(Section::Body(n));
        let layers: Vec<(usize, TissueLayer)> = sections
            .iter()
            .filter_map(|(s, (entries, line))| match s {
                Section::Layer(b, m) if *b == n => Some((*m, entries, *line)),
                _ => None,
            })
            .map(|(m, entries, header_line)| {
                let lr = Reader {
                    entries,
                    header_line,
                };
                Ok((
                    header_line,
                    TissueLayer {
                        name: lr
                            .raw("name")
                            .map_or_else(|| format!("layer{m}"), |(v, _)| v.to_string()),
                        radius_m: lr.required("radius_m")?,
                        rel_permittivity: lr.required("rel_permittivity")?,
                        rel_permeability: lr.f64("rel_permeability")?.unwrap_or(1.0),
                        decay_c: lr.required("decay_c")?,
                    },
                ))
            })
            .collect::<Result<_, ModelError>>()?;
        let label = br
            .raw("label")
            .map_or_else(|| format!("body{n}"), |(v, _)| v.to_string());
        let mut profile = match br.raw("preset") {
            Some((preset, line)) => {
                if !layers.is_empty() {
                    return Err(cfg_err(line, "preset and explicit layers are mutually exclusive"));
                }
                parse_preset(preset, line)?
            }
            None => BodyProfile {
                label: label.clone(),
                layers: layers.into_iter().map(|(_, l)| l).collect(),
            },
        };
        if br.raw("label").is_some() {
            profile.label = label;
        }
        profile
            .validate()
            .map_err(|e| cfg_err(br.header_line, e.to_string()))?;
        let geometry = PathGeometry::through(
            &profile,
            br.required("l1_m")?,
            br.required("l2_m")?,
            br.f64("offset_b_m")?.unwrap_or(0.0),
        )
        .map_err(|e| cfg_err(br.header_line, e.to_string()))?;
        scene.bodies.push(SceneBody { profile, geometry });
    }

    scene
        .validate()
        .map_err(|e| cfg_err(sc.header_line, e.to_string()))?;
    Ok(scene)
}

fn parse_preset(value: &str, line: usize) -> Result<BodyProfile, ModelError> {
    if value == "default" {
        return Ok(default_profile());
    }
    if let Some(k) = value.strip_prefix("subject:") {
        let k = k
            .trim()
            .parse::<u64>()
            .map_err(|_| cfg_err(line, format!("key preset: bad subject index in {value:?}")))?;
        return Ok(synthetic_subject(k));
    }
    Err(cfg_err(line, format!("key preset: unknown preset {value:?}")))
}

pub fn read_scene_file(path: impl AsRef<Path>) -> Result<Scene, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg_err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_scene(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "\
# two bodies
[scene]
carrier_hz = 5e9
subcarriers = 30
seed = 11

[noise]
sigma_m = 0.05
motion_freq_hz = 0.3

[body.0]
label = alice
l1_m = 1.25
l2_m = 1.25
offset_b_m = 0.01
preset = subject:3

[body.1]
l1_m = 2
l2_m = 1.5

[layer.1.0]
name = core
radius_m = 0.1
rel_permittivity = 40
decay_c = 0.8

[layer.1.1]
radius_m = 0.15
rel_permittivity = 30
decay_c = 0.9
";

    #[test]
    fn parses_full_document() {
        let scene = parse_scene(DOC).unwrap();
        assert_eq!(scene.seed, 11);
        assert_eq!(scene.subcarrier_offsets_hz.len(), 30);
        assert_eq!(scene.noise.sigma_m, 0.05);
        assert_eq!(scene.noise.sigma_s, crate::body_model::NoiseModel::default().sigma_s);
        assert_eq!(scene.bodies.len(), 2);
        assert_eq!(scene.bodies[0].profile.label, "alice");
        assert_eq!(scene.bodies[0].profile.layers, synthetic_subject(3).layers);
        assert_eq!(scene.bodies[1].profile.layers.len(), 2);
        assert_eq!(scene.bodies[1].profile.layers[0].name, "core");
        let got = &scene.bodies[1].geometry.in_lengths_m;
        assert_eq!(got.len(), 2);
        assert!((got[0] - 0.1).abs() < 1e-12 && (got[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_document_is_default_scene() {
        assert_eq!(parse_scene("").unwrap(), Scene::default());
    }

    fn err_line(doc: &str) -> (usize, String) {
        match parse_scene(doc) {
            Err(ModelError::Config { line, msg }) => (line, msg),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        let (line, msg) = err_line("[scene]\ncarrier_hz = 5e9\nfrobnicate = 1\n");
        assert_eq!(line, 3);
        assert!(msg.contains("frobnicate"));
    }

    #[test]
    fn other_errors() {
        assert_eq!(err_line("[nope]\n").0, 1);
        assert_eq!(err_line("carrier_hz = 1\n").0, 1);
        assert_eq!(err_line("[scene]\nrate_hz = fast\n").0, 2);
        assert_eq!(err_line("[scene]\nseed = 1\nseed = 2\n").0, 3);
        assert_eq!(err_line("[layer.4.0]\nradius_m = 1\n").0, 1);
        // missing l2_m reported at the body header
        assert_eq!(err_line("\n[body.0]\nl1_m = 1\npreset = default\n").0, 2);
        // ray misses the body
        assert_eq!(
            err_line("[body.0]\nl1_m = 1\nl2_m = 1\noffset_b_m = 0.5\npreset = default\n").0,
            1
        );
        assert_eq!(err_line("[noise]\nmotion_freq_hz = 2\n").0, 1);
    }
}
