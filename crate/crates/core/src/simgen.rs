//! Parametric return-pulse simulator.
//!
//! A return is a Gaussian main lobe plus an exponential tail on top of a
//! flat baseline. Incidence angle attenuates the lobe by `cos(yaw)^falloff`
//! and widens it by `1 / cos(yaw)`. Shot noise, read noise and per-capture
//! pulse-energy jitter are drawn from ChaCha streams keyed by the capture
//! seed, then everything is clipped to `[0, a_sat]`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::KvConfig;
use crate::rng;
use crate::types::{CaptureMeta, ClassId, Dataset, LabeledSample, MaterialClass, Waveform};
use crate::{Error, Result, WAVEFORM_LEN};

/// Lobe half-support before the centre, in effective standard deviations.
const LOBE_LEAD_SIGMAS: f64 = 6.0;
/// Offset of the lobe centre after the onset index.
const ONSET_TO_CENTRE_SIGMAS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialProfile {
    pub name: String,
    /// Peak return fraction at normal incidence.
    pub reflectivity: f64,
    /// Tail energy relative to the lobe peak.
    pub tail_gain: f64,
    /// Tail decay constant, sample indices.
    pub tail_decay: f64,
    pub width_scale: f64,
    pub colour_scale: f64,
    /// Exponent on `cos(yaw)`; 1 is Lambertian, larger is more specular.
    pub angular_falloff: f64,
}

impl MaterialProfile {
    pub fn validate(&self, r_max: f64) -> Result<()> {
        let p = |field: &str, reason: &str| Error::param(&format!("material.{}.{field}", self.name), reason);
        let finite = [
            self.reflectivity,
            self.tail_gain,
            self.tail_decay,
            self.width_scale,
            self.colour_scale,
            self.angular_falloff,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(p("*", "all fields must be finite"));
        }
        if self.reflectivity <= 0.0 || self.reflectivity > r_max {
            return Err(p("reflectivity", "must lie in (0, r_max]"));
        }
        if self.tail_gain < 0.0 {
            return Err(p("tail_gain", "must be >= 0"));
        }
        if self.tail_decay <= 0.0 {
            return Err(p("tail_decay", "must be > 0"));
        }
        if self.width_scale <= 0.0 {
            return Err(p("width_scale", "must be > 0"));
        }
        if self.colour_scale <= 0.0 || self.colour_scale > 1.0 {
            return Err(p("colour_scale", "must lie in (0, 1]"));
        }
        if self.angular_falloff <= 0.0 {
            return Err(p("angular_falloff", "must be > 0"));
        }
        if self.reflectivity * self.colour_scale > r_max {
            return Err(p("reflectivity", "reflectivity * colour_scale exceeds r_max"));
        }
        Ok(())
    }

    fn from_config(cfg: &KvConfig, name: &str) -> Result<Self> {
        let key = |f: &str| format!("material.{name}.{f}");
        Ok(MaterialProfile {
            name: name.to_string(),
            reflectivity: cfg.require(&key("reflectivity"))?,
            tail_gain: cfg.require(&key("tail_gain"))?,
            tail_decay: cfg.require(&key("tail_decay"))?,
            width_scale: cfg.require(&key("width_scale"))?,
            colour_scale: cfg.require(&key("colour_scale"))?,
            angular_falloff: cfg.get_or(&key("angular_falloff"), 1.0)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub n_samples: usize,
    /// Emitted Gaussian standard deviation, sample indices.
    pub pulse_width: f64,
    pub samples_per_metre: f64,
    pub a_sat: f64,
    pub r_max: f64,
    pub baseline: f64,
    pub noise_std: f64,
    pub shot_noise: f64,
    pub gain_jitter: f64,
    /// Per-capture standard deviation of the true board yaw around the
    /// nominal one, degrees.
    pub yaw_jitter_deg: f64,
    /// Per-capture standard deviation of the beam's lateral offset from the
    /// board's rotation axis, metres. Shifts the range by `offset * sin(yaw)`.
    pub aim_jitter_m: f64,
    /// Per-capture relative jitter of the emitted pulse width.
    pub width_jitter: f64,
}

impl SensorModel {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let s = SensorModel {
            n_samples: cfg.require("sensor.n_samples")?,
            pulse_width: cfg.require("sensor.pulse_width")?,
            samples_per_metre: cfg.require("sensor.samples_per_metre")?,
            a_sat: cfg.require("sensor.a_sat")?,
            r_max: cfg.get_or("sensor.r_max", 2.0)?,
            baseline: cfg.require("sensor.baseline")?,
            noise_std: cfg.require("sensor.noise_std")?,
            shot_noise: cfg.get_or("sensor.shot_noise", 0.0)?,
            gain_jitter: cfg.get_or("sensor.gain_jitter", 0.0)?,
            yaw_jitter_deg: cfg.get_or("sensor.yaw_jitter_deg", 0.0)?,
            aim_jitter_m: cfg.get_or("sensor.aim_jitter_m", 0.0)?,
            width_jitter: cfg.get_or("sensor.width_jitter", 0.0)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples != WAVEFORM_LEN {
            return Err(Error::param("sensor.n_samples", format!("must be {WAVEFORM_LEN}")));
        }
        let positive = [
            ("sensor.pulse_width", self.pulse_width),
            ("sensor.samples_per_metre", self.samples_per_metre),
            ("sensor.a_sat", self.a_sat),
            ("sensor.r_max", self.r_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be finite and > 0"));
            }
        }
        let non_negative = [
            ("sensor.baseline", self.baseline),
            ("sensor.noise_std", self.noise_std),
            ("sensor.shot_noise", self.shot_noise),
            ("sensor.gain_jitter", self.gain_jitter),
            ("sensor.yaw_jitter_deg", self.yaw_jitter_deg),
            ("sensor.aim_jitter_m", self.aim_jitter_m),
            ("sensor.width_jitter", self.width_jitter),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, "must be finite and >= 0"));
            }
        }
        if self.baseline > self.a_sat {
            return Err(Error::param("sensor.baseline", "exceeds a_sat"));
        }
        Ok(())
    }

    /// A noise-free copy.
    pub fn noiseless(&self) -> Self {
        SensorModel {
            noise_std: 0.0,
            shot_noise: 0.0,
            gain_jitter: 0.0,
            yaw_jitter_deg: 0.0,
            aim_jitter_m: 0.0,
            width_jitter: 0.0,
            ..self.clone()
        }
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel::from_config(&KvConfig::builtin()).expect("builtin sensor config is valid")
    }
}

/// Geometry of the noise-free return before clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseGeometry {
    /// Round-trip onset index.
    pub onset: usize,
    /// Effective lobe standard deviation.
    pub sigma: f64,
    /// Lobe centre (fractional index).
    pub centre: f64,
    /// Lobe peak amplitude above baseline.
    pub amplitude: f64,
}

impl PulseGeometry {
    /// First index the lobe may touch; everything before it is baseline.
    pub fn lobe_start(&self) -> f64 {
        self.centre - LOBE_LEAD_SIGMAS * self.sigma
    }
}

pub fn pulse_geometry(
    material: &MaterialProfile,
    sensor: &SensorModel,
    yaw_deg: f64,
    distance_m: f64,
) -> Result<PulseGeometry> {
    if !(yaw_deg.is_finite() && yaw_deg.abs() < 90.0) {
        return Err(Error::param("yaw_deg", "must lie in (-90, 90)"));
    }
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::param("distance_m", "must be > 0"));
    }
    let cos = libm::cos(yaw_deg.to_radians());
    let sigma = sensor.pulse_width * material.width_scale / cos;
    let onset_f = libm::round(2.0 * distance_m * sensor.samples_per_metre);
    let n = sensor.n_samples as f64;
    if onset_f >= n {
        return Err(Error::PulseOutOfWindow {
            parameter: "distance_m",
            detail: format!("onset index {onset_f} beyond window of {n}"),
        });
    }
    let onset = onset_f as usize;
    let centre = onset_f + ONSET_TO_CENTRE_SIGMAS * sigma;
    let fits = |sig: f64| {
        onset_f - ONSET_TO_CENTRE_SIGMAS * sig >= 0.0
            && onset_f + 2.0 * ONSET_TO_CENTRE_SIGMAS * sig < n
    };
    if !fits(sigma) {
        let sigma0 = sensor.pulse_width * material.width_scale;
        let span = 3.0 * ONSET_TO_CENTRE_SIGMAS;
        let parameter = if span * sigma0 >= n {
            "pulse_width"
        } else if fits(sigma0) {
            "yaw_deg"
        } else {
            "distance_m"
        };
        return Err(Error::PulseOutOfWindow {
            parameter,
            detail: format!("lobe [onset {onset}, sigma {sigma:.3}] does not fit in {n} samples"),
        });
    }
    let amplitude = sensor.a_sat
        * material.reflectivity
        * material.colour_scale
        * libm::pow(cos, material.angular_falloff);
    Ok(PulseGeometry {
        onset,
        sigma,
        centre,
        amplitude,
    })
}

/// Noise-free, unclipped return for a given lobe amplitude.
fn clean_return(geom: &PulseGeometry, amplitude: f64, material: &MaterialProfile, sensor: &SensorModel) -> Vec<f64> {
    let start = geom.lobe_start();
    (0..sensor.n_samples)
        .map(|i| {
            let x = i as f64;
            let mut v = sensor.baseline;
            if x >= start {
                let d = (x - geom.centre) / geom.sigma;
                v += amplitude * libm::exp(-0.5 * d * d);
            }
            if x > geom.centre {
                v += amplitude * material.tail_gain * libm::exp(-(x - geom.centre) / material.tail_decay);
            }
            v
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Simulates one low-power return. Deterministic in all arguments.
pub fn simulate_return(
    material: &MaterialProfile,
    sensor: &SensorModel,
    yaw_deg: f64,
    distance_m: f64,
    noise_seed: u64,
) -> Result<Waveform> {
    sensor.validate()?;
    material.validate(sensor.r_max)?;
    let mut geom = pulse_geometry(material, sensor, yaw_deg, distance_m)?;
    if sensor.yaw_jitter_deg > 0.0 || sensor.aim_jitter_m > 0.0 {
        let true_yaw = yaw_deg + sensor.yaw_jitter_deg * normal(&mut rng::stream(noise_seed, &[3]));
        let offset = sensor.aim_jitter_m * normal(&mut rng::stream(noise_seed, &[4]));
        let range = distance_m + offset * libm::sin(true_yaw.to_radians());
        geom = pulse_geometry(material, sensor, true_yaw, range)?;
    }
    if sensor.width_jitter > 0.0 {
        let k = (1.0 + sensor.width_jitter * normal(&mut rng::stream(noise_seed, &[5]))).max(0.5);
        geom.sigma *= k;
    }

    let mut gain_rng = rng::stream(noise_seed, &[0]);
    let gain = if sensor.gain_jitter > 0.0 {
        (1.0 + sensor.gain_jitter * normal(&mut gain_rng)).max(0.0)
    } else {
        1.0
    };
    let mut samples = clean_return(&geom, geom.amplitude * gain, material, sensor);

    if sensor.shot_noise > 0.0 {
        let mut shot_rng = rng::stream(noise_seed, &[1]);
        for v in samples.iter_mut() {
            let z = normal(&mut shot_rng);
            let signal = (*v - sensor.baseline).max(0.0);
            *v += sensor.shot_noise * libm::sqrt(sensor.a_sat * signal) * z;
        }
    }
    if sensor.noise_std > 0.0 {
        let mut read_rng = rng::stream(noise_seed, &[2]);
        for v in samples.iter_mut() {
            *v += sensor.noise_std * normal(&mut read_rng);
        }
    }
    for v in samples.iter_mut() {
        *v = v.clamp(0.0, sensor.a_sat);
    }
    Waveform::new(samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub materials: Vec<MaterialProfile>,
    pub angles_deg: Vec<f64>,
    pub distance_m: f64,
    pub repetitions: u8,
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::param("materials", "at least one material required"));
        }
        if self.angles_deg.is_empty() {
            return Err(Error::param("angles_deg", "at least one angle required"));
        }
        if let Some(a) = self
            .angles_deg
            .iter()
            .find(|a| !(a.is_finite() && a.abs() < 90.0))
        {
            return Err(Error::param("angles_deg", format!("{a} outside (-90, 90)")));
        }
        if self.repetitions < 1 {
            return Err(Error::param("repetitions", "must be >= 1"));
        }
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(Error::param("distance_m", "must be > 0"));
        }
        for (i, m) in self.materials.iter().enumerate() {
            if self.materials[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::param("materials", format!("duplicate material {}", m.name)));
            }
            if m.name.is_empty() || m.name.contains([',', '=', '\n']) {
                return Err(Error::param("materials", format!("bad material name {:?}", m.name)));
            }
        }
        Ok(())
    }
}

fn name_key(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-capture noise seed. Keyed by material name and angle value rather
/// than list positions, so reordering a protocol never changes a waveform.
pub fn capture_seed(root: u64, material: &str, yaw_deg: f64, repetition: u8) -> u64 {
    rng::derive_seed(
        root,
        &[name_key(material), yaw_deg.to_bits(), repetition as u64],
    )
}

/// One labelled sample per (material, angle, repetition), material-major.
pub fn generate_dataset(spec: &ProtocolSpec, sensor: &SensorModel) -> Result<Dataset> {
    spec.validate()?;
    sensor.validate()?;
    let class_table: Vec<MaterialClass> = spec
        .materials
        .iter()
        .enumerate()
        .map(|(i, m)| MaterialClass::new(i as u16, m.name.clone()))
        .collect();
    let mut samples = Vec::with_capacity(
        spec.materials.len() * spec.angles_deg.len() * spec.repetitions as usize,
    );
    for (mi, material) in spec.materials.iter().enumerate() {
        for &yaw in &spec.angles_deg {
            for rep in 1..=spec.repetitions {
                let seed = capture_seed(spec.seed, &material.name, yaw, rep);
                let waveform = simulate_return(material, sensor, yaw, spec.distance_m, seed)?;
                samples.push(LabeledSample {
                    waveform,
                    meta: CaptureMeta::new(yaw, spec.distance_m, rep)?,
                    label: ClassId(mi as u16),
                });
            }
        }
    }
    Dataset::new(samples, class_table, spec.seed)
}

/// Every material profile declared in `cfg`, in declaration order.
pub fn material_bank_from_config(cfg: &KvConfig) -> Result<Vec<MaterialProfile>> {
    let r_max: f64 = cfg.get_or("sensor.r_max", 2.0)?;
    cfg.sections("material")
        .iter()
        .map(|name| {
            let m = MaterialProfile::from_config(cfg, name)?;
            m.validate(r_max)?;
            Ok(m)
        })
        .collect()
}

/// The four board materials followed by the five cardboard colour variants.
pub fn default_material_bank() -> Vec<MaterialProfile> {
    material_bank_from_config(&KvConfig::builtin()).expect("builtin material bank is valid")
}

pub fn find_material<'a>(bank: &'a [MaterialProfile], name: &str) -> Result<&'a MaterialProfile> {
    bank.iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
}

pub type Point3 = [f64; 3];

/// Labels points inside the axis-aligned box `center ± extent` (inclusive)
/// with `material`, everything else with the unknown background class.
pub fn label_board_points(
    points: &[(Point3, usize)],
    board_center: Point3,
    board_extent: Point3,
    material: &MaterialClass,
) -> Vec<MaterialClass> {
    points
        .iter()
        .map(|(p, _)| {
            let inside = (0..3).all(|k| (p[k] - board_center[k]).abs() <= board_extent[k]);
            if inside {
                material.clone()
            } else {
                MaterialClass::unknown()
            }
        })
        .collect()
}

/// Per-class mean waveform, in class-table order; classes without samples
/// are skipped.
pub fn class_mean_waveforms(dataset: &Dataset) -> Vec<(MaterialClass, Vec<f64>)> {
    dataset
        .class_table()
        .iter()
        .filter_map(|class| {
            let mut sum = alloc::vec![0.0; WAVEFORM_LEN];
            let mut n = 0usize;
            for s in dataset.samples().iter().filter(|s| s.label == class.id) {
                for (acc, v) in sum.iter_mut().zip(s.waveform.samples()) {
                    *acc += v;
                }
                n += 1;
            }
            (n > 0).then(|| {
                sum.iter_mut().for_each(|v| *v /= n as f64);
                (class.clone(), sum)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plain(reflectivity: f64) -> MaterialProfile {
        MaterialProfile {
            name: "plain".into(),
            reflectivity,
            tail_gain: 0.0,
            tail_decay: 10.0,
            width_scale: 1.0,
            colour_scale: 1.0,
            angular_falloff: 1.0,
        }
    }

    #[test]
    fn saturating_material_plateaus_at_ceiling() {
        let sensor = SensorModel::default().noiseless();
        let w = simulate_return(&plain(1.8), &sensor, 0.0, 1.0, 1).unwrap();
        let plateau = w.samples().iter().filter(|&&v| v == sensor.a_sat).count();
        assert!(plateau >= 2, "plateau of {plateau} samples");
        assert!(w.samples().iter().all(|&v| v <= sensor.a_sat));
    }

    #[test]
    fn noiseless_is_deterministic_and_flat_headed() {
        let sensor = SensorModel::default().noiseless();
        let m = plain(0.5);
        let a = simulate_return(&m, &sensor, 0.0, 1.0, 3).unwrap();
        let b = simulate_return(&m, &sensor, 0.0, 1.0, 99).unwrap();
        assert_eq!(a, b);
        let g = pulse_geometry(&m, &sensor, 0.0, 1.0).unwrap();
        let head = (g.onset as f64 - 3.0 * g.sigma).floor() as usize;
        assert!(a.samples()[..head].iter().all(|&v| v == sensor.baseline));
    }

    #[test]
    fn cosine_law_at_sixty_degrees() {
        let sensor = SensorModel::default().noiseless();
        let m = plain(0.5);
        let g0 = pulse_geometry(&m, &sensor, 0.0, 1.0).unwrap();
        let g60 = pulse_geometry(&m, &sensor, 60.0, 1.0).unwrap();
        assert!((g60.amplitude - 0.5 * g0.amplitude).abs() < 1e-12);
        assert!((g60.sigma - 2.0 * g0.sigma).abs() < 1e-9);
    }

    #[test]
    fn onset_lands_at_sixty_for_one_metre() {
        let g = pulse_geometry(&plain(0.5), &SensorModel::default(), 0.0, 1.0).unwrap();
        assert_eq!(g.onset, 60);
    }

    #[test]
    fn out_of_window_names_parameter() {
        let sensor = SensorModel::default();
        let far = simulate_return(&plain(0.5), &sensor, 0.0, 10.0, 0).unwrap_err();
        assert!(matches!(far, Error::PulseOutOfWindow { parameter: "distance_m", .. }));
        let near = simulate_return(&plain(0.5), &sensor, 0.0, 0.05, 0).unwrap_err();
        assert!(matches!(near, Error::PulseOutOfWindow { parameter: "distance_m", .. }));
        let grazing = simulate_return(&plain(0.5), &sensor, 89.5, 1.0, 0).unwrap_err();
        assert!(matches!(grazing, Error::PulseOutOfWindow { parameter: "yaw_deg", .. }));
        let mut wide = plain(0.5);
        wide.width_scale = 40.0;
        let err = simulate_return(&wide, &sensor, 0.0, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::PulseOutOfWindow { parameter: "pulse_width", .. }));
    }

    #[test]
    fn rejects_bad_material() {
        let sensor = SensorModel::default();
        let mut m = plain(0.5);
        m.colour_scale = 1.5;
        assert!(simulate_return(&m, &sensor, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn bank_contents() {
        let bank = default_material_bank();
        for name in ["aluminum", "wood", "black_cardboard", "black_cloth"] {
            assert!(find_material(&bank, name).is_ok(), "{name}");
        }
        let colours: Vec<_> = bank.iter().filter(|m| m.name.starts_with("cardboard_")).collect();
        assert_eq!(colours.len(), 5);
        for c in &colours {
            assert_eq!(c.tail_gain, colours[0].tail_gain);
            assert_eq!(c.tail_decay, colours[0].tail_decay);
            assert_eq!(c.width_scale, colours[0].width_scale);
            assert_eq!(c.reflectivity, colours[0].reflectivity);
            assert_eq!(c.angular_falloff, colours[0].angular_falloff);
        }
    }

    #[test]
    fn aluminum_saturates_black_cloth_weakest() {
        let bank = default_material_bank();
        let sensor = SensorModel::default();
        let al = find_material(&bank, "aluminum").unwrap();
        let w = simulate_return(al, &sensor, 0.0, 1.0, 5).unwrap();
        assert!(w.samples().iter().filter(|&&v| v == sensor.a_sat).count() >= 1);
        let peak = |m: &MaterialProfile| m.reflectivity * m.colour_scale;
        let cloth = peak(find_material(&bank, "black_cloth").unwrap());
        assert!(bank.iter().all(|m| peak(m) >= cloth));
    }

    #[test]
    fn protocol_count() {
        let bank = default_material_bank();
        let spec = ProtocolSpec {
            materials: bank[..4].to_vec(),
            angles_deg: crate::types::PROTOCOL_YAWS_DEG.to_vec(),
            distance_m: 1.0,
            repetitions: 5,
            seed: 1,
        };
        let ds = generate_dataset(&spec, &SensorModel::default()).unwrap();
        assert_eq!(ds.len(), 180);
        assert_eq!(ds.n_classes(), 4);
        ds.validate_protocol().unwrap();
    }

    #[test]
    fn board_labels() {
        let m = MaterialClass::new(2, "wood");
        let c = [1.0, 2.0, 3.0];
        let e = [0.5, 0.5, 0.1];
        let pts = vec![(c, 0), ([2.0, 3.0, 3.2], 1), ([1.5, 1.5, 3.05], 2)];
        let labels = label_board_points(&pts, c, e, &m);
        assert_eq!(labels[0], m);
        assert!(labels[1].id.is_unknown());
        assert_eq!(labels[2], m);
    }
}
