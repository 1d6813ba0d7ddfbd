//! Material-classification experiments: three material sets, two angle
//! regimes, two models.
//!
//! An experiment generates one dataset per configured seed, holds out the
//! test repetitions, trains the model on the rest and pools the confusion
//! counts of all held-out predictions into a single IOU report.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::config::KvConfig;
use crate::forest::{self, Forest, ForestParams};
use crate::metrics::{self, ConfusionCounts, IouReport};
use crate::rng;
use crate::simgen::{self, MaterialProfile, ProtocolSpec, SensorModel};
use crate::tcn::{self, TcnModel, TcnParams};
use crate::types::{split_by_repetition, ClassId, Dataset, MaterialClass, PROTOCOL_YAWS_DEG};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MaterialSet {
    /// Aluminum and black cloth.
    Pair,
    /// Aluminum, wood, black cardboard, black cloth.
    AllMaterials,
    /// Five cardboard colours.
    Colours,
}

impl MaterialSet {
    pub const ALL: [MaterialSet; 3] = [MaterialSet::Pair, MaterialSet::AllMaterials, MaterialSet::Colours];

    pub fn as_str(self) -> &'static str {
        match self {
            MaterialSet::Pair => "pair",
            MaterialSet::AllMaterials => "all-materials",
            MaterialSet::Colours => "colours",
        }
    }

    pub fn material_names(self) -> &'static [&'static str] {
        match self {
            MaterialSet::Pair => &["aluminum", "black_cloth"],
            MaterialSet::AllMaterials => &["aluminum", "wood", "black_cardboard", "black_cloth"],
            MaterialSet::Colours => &[
                "cardboard_black",
                "cardboard_white",
                "cardboard_blue",
                "cardboard_orange",
                "cardboard_yellow",
            ],
        }
    }

    pub fn materials(self, bank: &[MaterialProfile]) -> Result<Vec<MaterialProfile>> {
        self.material_names()
            .iter()
            .map(|n| simgen::find_material(bank, n).cloned())
            .collect()
    }
}

impl FromStr for MaterialSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair" => Ok(MaterialSet::Pair),
            "all-materials" | "all_materials" => Ok(MaterialSet::AllMaterials),
            "colours" | "colors" => Ok(MaterialSet::Colours),
            _ => Err(Error::param("preset", format!("unknown material set {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AngleMode {
    Zero,
    All,
}

impl AngleMode {
    pub const ALL: [AngleMode; 2] = [AngleMode::Zero, AngleMode::All];

    pub fn as_str(self) -> &'static str {
        match self {
            AngleMode::Zero => "zero",
            AngleMode::All => "all",
        }
    }

    pub fn angles_deg(self) -> Vec<f64> {
        match self {
            AngleMode::Zero => alloc::vec![0.0],
            AngleMode::All => PROTOCOL_YAWS_DEG.to_vec(),
        }
    }
}

impl FromStr for AngleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(AngleMode::Zero),
            "all" => Ok(AngleMode::All),
            _ => Err(Error::param("angles", format!("unknown angle mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Rf,
    Tcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Rf, ModelKind::Tcn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Tcn => "tcn",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ModelKind::Rf),
            "tcn" => Ok(ModelKind::Tcn),
            _ => Err(Error::param("model", format!("unknown model {s:?}"))),
        }
    }
}

/// Everything needed to generate data and train one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSettings {
    pub sensor: SensorModel,
    pub bank: Vec<MaterialProfile>,
    pub distance_m: f64,
    pub repetitions: u8,
    pub test_reps: Vec<u8>,
    pub dataset_seeds: Vec<u64>,
    pub forest: ForestParams,
    pub tcn: TcnParams,
}

impl ModelSettings {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let s = ModelSettings {
            sensor: SensorModel::from_config(cfg)?,
            bank: simgen::material_bank_from_config(cfg)?,
            distance_m: cfg.require("protocol.distance_m")?,
            repetitions: cfg.require("protocol.repetitions")?,
            test_reps: cfg.list("experiment.test_reps")?.unwrap_or_else(|| alloc::vec![5]),
            dataset_seeds: match cfg.list("experiment.dataset_seeds")? {
                Some(v) => v,
                None => alloc::vec![cfg.require("protocol.seed")?],
            },
            forest: ForestParams::from_config(cfg, "forest")?,
            tcn: TcnParams::from_config(cfg)?,
        };
        if s.dataset_seeds.is_empty() {
            return Err(Error::param("experiment.dataset_seeds", "at least one seed required"));
        }
        Ok(s)
    }

    pub fn protocol(&self, set: MaterialSet, angles: AngleMode, seed: u64) -> Result<ProtocolSpec> {
        Ok(ProtocolSpec {
            materials: set.materials(&self.bank)?,
            angles_deg: angles.angles_deg(),
            distance_m: self.distance_m,
            repetitions: self.repetitions,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub set: MaterialSet,
    pub angles: AngleMode,
    pub model: ModelKind,
    pub settings: ModelSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: MaterialSet,
    pub model: ModelKind,
    pub angles: AngleMode,
    pub miou: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub row: ResultRow,
    pub report: IouReport,
    pub counts: ConfusionCounts,
    pub class_table: Vec<MaterialClass>,
}

/// A fitted classifier of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Forest(Forest),
    Tcn(TcnModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Forest(_) => ModelKind::Rf,
            TrainedModel::Tcn(_) => ModelKind::Tcn,
        }
    }

    pub fn predict(&self, x: &[f64]) -> ClassId {
        match self {
            TrainedModel::Forest(f) => f.predict(x),
            TrainedModel::Tcn(m) => tcn::predict_tcn(m, x),
        }
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<ClassId> {
        data.samples()
            .iter()
            .map(|s| self.predict(s.waveform.samples()))
            .collect()
    }

    /// mIOU over `data`.
    pub fn evaluate(&self, data: &Dataset) -> Result<IouReport> {
        metrics::evaluate(&self.predict_dataset(data), &data.labels())
    }
}

/// Trained model plus the per-iteration loss log (empty for forests).
pub struct Fit {
    pub model: TrainedModel,
    pub losses: Vec<f64>,
}

/// Trains `kind` on `train`. The model seed is mixed with `seed_key` so
/// that different datasets get independent model randomness.
pub fn fit(kind: ModelKind, train: &Dataset, settings: &ModelSettings, seed_key: u64) -> Result<Fit> {
    match kind {
        ModelKind::Rf => {
            let params = ForestParams {
                seed: rng::derive_seed(settings.forest.seed, &[seed_key]),
                ..settings.forest.clone()
            };
            Ok(Fit {
                model: TrainedModel::Forest(forest::train_forest(train, &params)?),
                losses: Vec::new(),
            })
        }
        ModelKind::Tcn => {
            let params = TcnParams {
                seed: rng::derive_seed(settings.tcn.seed, &[seed_key]),
                ..settings.tcn.clone()
            };
            let t = tcn::train_tcn(train, &params)?;
            Ok(Fit {
                model: TrainedModel::Tcn(t.model),
                losses: t.losses,
            })
        }
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let s = &spec.settings;
    if s.dataset_seeds.is_empty() {
        return Err(Error::param("dataset_seeds", "at least one seed required"));
    }
    let mut counts = ConfusionCounts::default();
    let mut class_table = Vec::new();
    for &seed in &s.dataset_seeds {
        let data = simgen::generate_dataset(&s.protocol(spec.set, spec.angles, seed)?, &s.sensor)?;
        let (train, test) = split_by_repetition(&data, &s.test_reps)?;
        let fitted = fit(spec.model, &train, s, seed)?;
        let preds = fitted.model.predict_dataset(&test);
        counts.add(&metrics::confusion(&preds, &test.labels())?);
        class_table = data.class_table().to_vec();
    }
    let report = metrics::iou_report(&counts)?;
    Ok(ExperimentResult {
        row: ResultRow {
            experiment: spec.set,
            model: spec.model,
            angles: spec.angles,
            miou: report.miou,
        },
        report,
        counts,
        class_table,
    })
}

/// `(index, importance)` for every feature.
pub fn importance_report(forest: &Forest) -> Result<Vec<(usize, f64)>> {
    Ok(forest::feature_importance(forest)?.into_iter().enumerate().collect())
}

/// Number of leading indices at which every waveform in `data` equals
/// `baseline` exactly.
pub fn flat_head_len(data: &Dataset, baseline: f64) -> usize {
    let n = data.samples().first().map_or(0, |s| s.waveform.samples().len());
    (0..n)
        .find(|&i| data.samples().iter().any(|s| s.waveform.samples()[i] != baseline))
        .unwrap_or(n)
}

/// Inclusive index span covered by the half-maximum region of any class
/// mean waveform, measured above `baseline`.
pub fn main_lobe_span(data: &Dataset, baseline: f64) -> Option<(usize, usize)> {
    let mut span: Option<(usize, usize)> = None;
    for (_, mean) in simgen::class_mean_waveforms(data) {
        let peak = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max) - baseline;
        if peak <= 0.0 {
            continue;
        }
        for (i, v) in mean.iter().enumerate() {
            if v - baseline >= 0.5 * peak {
                span = Some(match span {
                    None => (i, i),
                    Some((lo, hi)) => (lo.min(i), hi.max(i)),
                });
            }
        }
    }
    span
}

pub fn row_label(row: &ResultRow) -> String {
    format!("{}/{}/{}", row.experiment.as_str(), row.angles.as_str(), row.model.as_str())
}
