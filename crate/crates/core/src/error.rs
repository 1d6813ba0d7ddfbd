use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("waveform must have exactly {expected} samples, got {actual}")]
    WaveformLength { expected: usize, actual: usize },

    #[error("waveform sample {index} is {value}, expected a finite non-negative amplitude")]
    InvalidSample { index: usize, value: f64 },

    #[error("sample {sample}: label id {label} is outside the class table ({classes} classes)")]
    LabelOutOfRange {
        sample: usize,
        label: u16,
        classes: usize,
    },

    #[error("sample {sample}: unknown background label in a training partition")]
    UnknownLabel { sample: usize },

    #[error("duplicate class id {0} in class table")]
    DuplicateClass(u16),

    #[error("invalid capture metadata: {0}")]
    InvalidMeta(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training data holds a single class; need at least two")]
    SingleClass,

    #[error("pulse does not fit in the sample window: {parameter} {detail}")]
    PulseOutOfWindow {
        parameter: &'static str,
        detail: String,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown material {0:?}")]
    UnknownMaterial(String),

    #[error("forest has no internal nodes")]
    NoInternalNodes,

    #[error("length mismatch: {left} predictions vs {right} ground-truth labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion counts are all zero; IOU is undefined")]
    EmptyConfusion,

    #[error("unknown semantic label {0:?}")]
    UnknownSemanticLabel(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
