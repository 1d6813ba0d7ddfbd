//! Intersection-over-union metrics.
//!
//! Per class, `IOU = TP / (TP + FP + FN)`. Positions whose ground truth is
//! the unknown background class are skipped entirely. The mean IOU averages
//! over classes with a non-zero denominator, so a class absent from both
//! predictions and ground truth does not drag the mean toward zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::types::ClassId;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionCounts {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }

    /// Number of evaluated (non-background) ground-truth points.
    pub fn evaluated(&self) -> u64 {
        self.tp.iter().sum::<u64>() + self.fn_.iter().sum::<u64>()
    }

    /// Accumulates another set of counts, widening if needed.
    pub fn add(&mut self, other: &ConfusionCounts) {
        let k = self.n_classes().max(other.n_classes());
        for v in [&mut self.tp, &mut self.fp, &mut self.fn_] {
            v.resize(k, 0);
        }
        for i in 0..other.n_classes() {
            self.tp[i] += other.tp[i];
            self.fp[i] += other.fp[i];
            self.fn_[i] += other.fn_[i];
        }
    }
}

/// Tallies TP/FP/FN over positions whose truth is not background.
/// A background prediction on a known point counts only as a miss.
pub fn confusion(preds: &[ClassId], truth: &[ClassId]) -> Result<ConfusionCounts> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    let width = preds
        .iter()
        .chain(truth)
        .filter(|c| !c.is_unknown())
        .map(|c| c.index() + 1)
        .max()
        .unwrap_or(0);
    let mut counts = ConfusionCounts::zeros(width);
    for (&p, &t) in preds.iter().zip(truth) {
        if t.is_unknown() {
            continue;
        }
        if p == t {
            counts.tp[t.index()] += 1;
        } else {
            counts.fn_[t.index()] += 1;
            if !p.is_unknown() {
                counts.fp[p.index()] += 1;
            }
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IouReport {
    /// `(class, iou)` for every class with a non-zero denominator.
    pub per_class_iou: Vec<(ClassId, f64)>,
    pub miou: f64,
}

impl IouReport {
    pub fn iou(&self, class: ClassId) -> Option<f64> {
        self.per_class_iou
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, v)| *v)
    }
}

pub fn iou_report(c: &ConfusionCounts) -> Result<IouReport> {
    let per_class_iou: Vec<(ClassId, f64)> = (0..c.n_classes())
        .filter_map(|i| {
            let denom = c.tp[i] + c.fp[i] + c.fn_[i];
            (denom > 0).then(|| (ClassId(i as u16), c.tp[i] as f64 / denom as f64))
        })
        .collect();
    if per_class_iou.is_empty() {
        return Err(Error::EmptyConfusion);
    }
    let miou = per_class_iou.iter().map(|(_, v)| v).sum::<f64>() / per_class_iou.len() as f64;
    Ok(IouReport {
        per_class_iou,
        miou,
    })
}

/// Confusion followed by IOU.
pub fn evaluate(preds: &[ClassId], truth: &[ClassId]) -> Result<IouReport> {
    iou_report(&confusion(preds, truth)?)
}
