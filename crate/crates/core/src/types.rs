//! Domain types shared by every module: waveforms, labels, capture
//! metadata and the labelled dataset container.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Number of amplitude samples in one low-power return.
pub const WAVEFORM_LEN: usize = 256;

/// Yaw angles of the capture protocol, degrees.
pub const PROTOCOL_YAWS_DEG: [f64; 9] = [-60.0, -45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0, 60.0];

/// Repetitions per (material, angle) in the capture protocol.
pub const PROTOCOL_REPETITIONS: u8 = 5;

/// A single full-waveform return: exactly [`WAVEFORM_LEN`] amplitudes.
#[derive(Clone, PartialEq)]
pub struct Waveform(Vec<f64>);

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() != WAVEFORM_LEN {
            return Err(Error::WaveformLength {
                expected: WAVEFORM_LEN,
                actual: samples.len(),
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Waveform(samples))
    }

    pub fn zeros() -> Self {
        Waveform(alloc::vec![0.0; WAVEFORM_LEN])
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    /// Checks the saturation ceiling invariant.
    pub fn check_ceiling(&self, a_sat: f64) -> Result<()> {
        match self.0.iter().position(|&v| v > a_sat) {
            Some(index) => Err(Error::InvalidSample {
                index,
                value: self.0[index],
            }),
            None => Ok(()),
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl fmt::Debug for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let peak = self.0.iter().copied().fold(0.0_f64, f64::max);
        write!(f, "Waveform {{ len: {}, peak: {} }}", self.0.len(), peak)
    }
}

impl AsRef<[f64]> for Waveform {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Dense class identifier. [`ClassId::UNKNOWN`] marks background points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u16);

impl ClassId {
    pub const UNKNOWN: ClassId = ClassId(u16::MAX);

    pub fn is_unknown(self) -> bool {
        self == Self::UNKNOWN
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unknown() {
            f.write_str("unknown")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaterialClass {
    pub id: ClassId,
    pub name: String,
}

impl MaterialClass {
    pub fn new(id: u16, name: impl Into<String>) -> Self {
        MaterialClass {
            id: ClassId(id),
            name: name.into(),
        }
    }

    pub fn unknown() -> Self {
        MaterialClass {
            id: ClassId::UNKNOWN,
            name: String::from("unknown"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PowerMode {
    #[default]
    Low,
}

impl PowerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerMode::Low => "LOW",
        }
    }
}

/// Provenance of one capture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaptureMeta {
    pub yaw_deg: f64,
    pub distance_m: f64,
    pub repetition: u8,
    pub power_mode: PowerMode,
}

impl CaptureMeta {
    pub fn new(yaw_deg: f64, distance_m: f64, repetition: u8) -> Result<Self> {
        let meta = CaptureMeta {
            yaw_deg,
            distance_m,
            repetition,
            power_mode: PowerMode::Low,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.yaw_deg.is_finite() || self.yaw_deg.abs() >= 90.0 {
            return Err(Error::InvalidMeta(format!(
                "yaw {} outside (-90, 90)",
                self.yaw_deg
            )));
        }
        if !self.distance_m.is_finite() || self.distance_m <= 0.0 {
            return Err(Error::InvalidMeta(format!(
                "distance {} must be positive",
                self.distance_m
            )));
        }
        if self.repetition == 0 {
            return Err(Error::InvalidMeta("repetition must be >= 1".into()));
        }
        Ok(())
    }

    /// Protocol conformance: yaw on the 15 degree grid and repetition in 1..=5.
    pub fn validate_protocol(&self) -> Result<()> {
        self.validate()?;
        if !PROTOCOL_YAWS_DEG.contains(&self.yaw_deg) {
            return Err(Error::InvalidMeta(format!(
                "yaw {} is not on the protocol grid",
                self.yaw_deg
            )));
        }
        if self.repetition > PROTOCOL_REPETITIONS {
            return Err(Error::InvalidMeta(format!(
                "repetition {} outside 1..={}",
                self.repetition, PROTOCOL_REPETITIONS
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub waveform: Waveform,
    pub meta: CaptureMeta,
    pub label: ClassId,
}

/// Labelled samples plus the class table they index into.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    class_table: Vec<MaterialClass>,
    seed: u64,
}

impl Dataset {
    pub fn new(
        samples: Vec<LabeledSample>,
        class_table: Vec<MaterialClass>,
        seed: u64,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for class in &class_table {
            if !seen.insert(class.id) {
                return Err(Error::DuplicateClass(class.id.0));
            }
        }
        for (pos, class) in class_table.iter().enumerate() {
            if class.id.index() != pos {
                return Err(Error::InvalidMeta(format!(
                    "class table ids must be dense 0..{}; found {} at position {}",
                    class_table.len(),
                    class.id,
                    pos
                )));
            }
        }
        for (i, sample) in samples.iter().enumerate() {
            if sample.label.is_unknown() {
                return Err(Error::UnknownLabel { sample: i });
            }
            if sample.label.index() >= class_table.len() {
                return Err(Error::LabelOutOfRange {
                    sample: i,
                    label: sample.label.0,
                    classes: class_table.len(),
                });
            }
            sample.meta.validate()?;
        }
        Ok(Dataset {
            samples,
            class_table,
            seed,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn class_table(&self) -> &[MaterialClass] {
        &self.class_table
    }

    pub fn n_classes(&self) -> usize {
        self.class_table.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassId> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.waveform.samples()).collect()
    }

    /// Number of distinct labels actually present.
    pub fn classes_present(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.label)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Rejects samples off the protocol angle grid or repetition range.
    pub fn validate_protocol(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            s.meta
                .validate_protocol()
                .map_err(|e| Error::InvalidMeta(format!("sample {i}: {e}")))?;
        }
        Ok(())
    }

    fn with_samples(&self, samples: Vec<LabeledSample>) -> Dataset {
        Dataset {
            samples,
            class_table: self.class_table.clone(),
            seed: self.seed,
        }
    }
}

/// Partitions `dataset` into `(train, test)`; a sample is in test iff its
/// repetition index is one of `test_reps`.
pub fn split_by_repetition(dataset: &Dataset, test_reps: &[u8]) -> Result<(Dataset, Dataset)> {
    if test_reps.is_empty() {
        return Err(Error::DegenerateSplit("no test repetitions given".into()));
    }
    if let Some(r) = test_reps.iter().find(|&&r| r == 0) {
        return Err(Error::DegenerateSplit(format!("repetition {r} is not >= 1")));
    }
    let (test, train): (Vec<_>, Vec<_>) = dataset
        .samples
        .iter()
        .cloned()
        .partition(|s| test_reps.contains(&s.meta.repetition));
    if train.is_empty() {
        return Err(Error::DegenerateSplit(
            "test repetitions cover every sample".into(),
        ));
    }
    if test.is_empty() {
        return Err(Error::DegenerateSplit(
            "no sample has a test repetition".into(),
        ));
    }
    Ok((dataset.with_samples(train), dataset.with_samples(test)))
}
