//! Does a per-point material channel help semantic segmentation?
//!
//! A toy point scene: every point carries an RGB colour drawn around its
//! semantic class's mean colour, and the material of that class. A forest
//! is trained point-wise on colour alone or on colour plus material id and
//! scored by test mIOU.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::config::KvConfig;
use crate::forest::{self, ForestParams};
use crate::metrics;
use crate::rng;
use crate::semantic::{self, SurfaceMaterial};
use crate::types::{ClassId, MaterialClass};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneClass {
    pub label: String,
    pub colour: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub classes: Vec<SceneClass>,
    pub points_per_class: usize,
    pub colour_std: f64,
}

fn class(label: &str, colour: [f64; 3]) -> SceneClass {
    SceneClass {
        label: label.into(),
        colour,
    }
}

impl SceneSpec {
    /// Classes whose colours overlap. Wall, Toilet and Bed are all
    /// off-white but differ in material; Sofa and Floor share a grey. Table
    /// and Door share both colour and material and stay confused.
    pub fn colour_ambiguous(points_per_class: usize, colour_std: f64) -> Self {
        SceneSpec {
            classes: alloc::vec![
                class("Wall", [0.85, 0.85, 0.80]),
                class("Toilet", [0.86, 0.85, 0.81]),
                class("Bed", [0.82, 0.82, 0.78]),
                class("Sofa", [0.40, 0.40, 0.45]),
                class("Floor", [0.42, 0.41, 0.44]),
                class("Table", [0.55, 0.35, 0.20]),
                class("Door", [0.56, 0.36, 0.21]),
                class("Window", [0.60, 0.72, 0.88]),
            ],
            points_per_class,
            colour_std,
        }
    }

    /// Well separated colours with a tight spread.
    pub fn colour_separable(points_per_class: usize) -> Self {
        SceneSpec {
            classes: alloc::vec![
                class("Wall", [0.9, 0.9, 0.9]),
                class("Floor", [0.1, 0.1, 0.1]),
                class("Window", [0.1, 0.1, 0.9]),
                class("Table", [0.9, 0.1, 0.1]),
                class("Bed", [0.1, 0.9, 0.1]),
            ],
            points_per_class,
            colour_std: 0.01,
        }
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        Ok(SceneSpec::colour_ambiguous(
            cfg.require("ablation.points_per_class")?,
            cfg.require("ablation.colour_std")?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::param("classes", "scene has no classes"));
        }
        if self.points_per_class < 2 {
            return Err(Error::param("points_per_class", "need at least 2 points per class"));
        }
        if !(self.colour_std.is_finite() && self.colour_std >= 0.0) {
            return Err(Error::param("colour_std", "must be finite and non-negative"));
        }
        for c in &self.classes {
            semantic::surface_material(&c.label)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenePoint {
    pub colour: [f64; 3],
    pub semantic: ClassId,
    pub material: SurfaceMaterial,
}

impl ScenePoint {
    pub fn features(&self, with_material: bool) -> Vec<f64> {
        let mut f = self.colour.to_vec();
        if with_material {
            f.push(self.material as u16 as f64);
        }
        f
    }
}

/// Points in class order; colours are not clipped.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Vec<ScenePoint>> {
    spec.validate()?;
    let mut pts = Vec::with_capacity(spec.classes.len() * spec.points_per_class);
    for (k, c) in spec.classes.iter().enumerate() {
        let material = semantic::surface_material(&c.label)?;
        let noise = Normal::new(0.0, spec.colour_std)
            .map_err(|_| Error::param("colour_std", "invalid"))?;
        let mut r = rng::stream(seed, &[k as u64]);
        for _ in 0..spec.points_per_class {
            let mut colour = c.colour;
            for v in colour.iter_mut() {
                *v += noise.sample(&mut r);
            }
            pts.push(ScenePoint {
                colour,
                semantic: ClassId(k as u16),
                material,
            });
        }
    }
    Ok(pts)
}

/// Trains on a shuffled half of each class and returns mIOU on the rest.
/// A one-class scene is rejected by the forest.
pub fn segmentation_ablation(
    spec: &SceneSpec,
    scene_seed: u64,
    with_material: bool,
    params: &ForestParams,
) -> Result<f64> {
    let pts = generate_scene(spec, scene_seed)?;
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.shuffle(&mut rng::stream(scene_seed, &[u64::MAX]));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut seen = alloc::vec![0usize; spec.classes.len()];
    for i in idx {
        let k = pts[i].semantic.index();
        if seen[k].is_multiple_of(2) {
            train.push(i);
        } else {
            test.push(i);
        }
        seen[k] += 1;
    }
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| pts[i].features(with_material)).collect();
    let labels: Vec<ClassId> = train.iter().map(|&i| pts[i].semantic).collect();
    let table: Vec<MaterialClass> = spec
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| MaterialClass::new(k as u16, c.label.clone()))
        .collect();
    let params = ForestParams {
        seed: rng::derive_seed(params.seed, &[scene_seed]),
        ..params.clone()
    };
    let f = forest::train_on_rows(&rows, &labels, &table, &params)?;
    let preds: Vec<ClassId> = test.iter().map(|&i| f.predict(&pts[i].features(with_material))).collect();
    let truth: Vec<ClassId> = test.iter().map(|&i| pts[i].semantic).collect();
    Ok(metrics::evaluate(&preds, &truth)?.miou)
}

/// `(without, with)` material channel.
pub fn ablation_pair(spec: &SceneSpec, scene_seed: u64, params: &ForestParams) -> Result<(f64, f64)> {
    Ok((
        segmentation_ablation(spec, scene_seed, false, params)?,
        segmentation_ablation(spec, scene_seed, true, params)?,
    ))
}
