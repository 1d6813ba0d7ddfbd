//! Brute-force reference implementations shared by the oracle tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use wavemat_core::forest::{Forest, TreeNode};
use wavemat_core::{rng, ClassId, MaterialClass};

pub fn classes(k: usize) -> Vec<MaterialClass> {
    (0..k).map(|i| MaterialClass::new(i as u16, format!("c{i}"))).collect()
}

/// Small-integer features so that ties between splits actually occur.
pub fn random_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<ClassId>, usize) {
    let mut r = rng::stream(seed, &[]);
    let n = r.random_range(4..=50);
    let d = r.random_range(1..=8);
    let k = r.random_range(2..=4);
    let levels = r.random_range(2..=10);
    let rows = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(0..levels) as f64).collect())
        .collect();
    let mut labels: Vec<ClassId> = (0..n).map(|_| ClassId(r.random_range(0..k) as u16)).collect();
    labels[0] = ClassId(0);
    labels[1] = ClassId(1);
    (rows, labels, k)
}

/// Exhaustive root split: maximise `sum(l^2)/n_l + sum(r^2)/n_r`, compared
/// as exact fractions; ties keep the earliest (feature, threshold).
pub fn exhaustive_root(rows: &[Vec<f64>], labels: &[ClassId], k: usize) -> Option<(usize, f64)> {
    let n = rows.len() as u128;
    let counts = |sel: &dyn Fn(usize) -> bool| {
        let mut c = vec![0u128; k];
        let mut m = 0u128;
        for i in 0..rows.len() {
            if sel(i) {
                c[labels[i].index()] += 1;
                m += 1;
            }
        }
        (c.iter().map(|x| x * x).sum::<u128>(), m)
    };
    let (parent_sq, _) = counts(&|_| true);
    // best as (num, den) of the purity fraction
    let mut best: Option<(u128, u128, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (sl, nl) = counts(&|i| rows[i][f] <= t);
            let (sr, nr) = counts(&|i| rows[i][f] > t);
            let (num, den) = (sl * nr + sr * nl, nl * nr);
            // must beat the parent's sum(p^2)/n
            if num * n <= parent_sq * den {
                continue;
            }
            if best.is_none_or(|(bn, bd, _, _)| num * bd > bn * den) {
                best = Some((num, den, f, t));
            }
        }
    }
    best.map(|(_, _, f, t)| (f, t))
}

/// Independent traversal: walk every tree by hand and sum leaf votes.
pub fn traverse(f: &Forest, x: &[f64]) -> ClassId {
    let k = f.class_table().len();
    let mut totals = vec![0u64; k];
    for t in f.trees() {
        let nodes = t.nodes();
        let mut i = 0;
        while let TreeNode::Internal { feature, threshold, left, right } = &nodes[i] {
            i = if x[*feature] > *threshold { *right } else { *left };
        }
        if let TreeNode::Leaf { votes } = &nodes[i] {
            for (c, v) in votes.iter().enumerate() {
                totals[c] += *v as u64;
            }
        }
    }
    let mut best = 0;
    for c in 1..k {
        if totals[c] > totals[best] {
            best = c;
        }
    }
    ClassId(best as u16)
}

/// Per-point brute force: for each class seen on an evaluated point, count
/// directly from the definition.
pub fn brute_force(preds: &[ClassId], truth: &[ClassId]) -> (Vec<(u16, f64)>, f64) {
    let evaluated: Vec<usize> = (0..truth.len()).filter(|&i| !truth[i].is_unknown()).collect();
    let seen: BTreeSet<u16> = evaluated
        .iter()
        .flat_map(|&i| [preds[i], truth[i]])
        .filter(|c| !c.is_unknown())
        .map(|c| c.0)
        .collect();
    let mut per = Vec::new();
    for c in seen {
        let c = ClassId(c);
        let tp = evaluated.iter().filter(|&&i| preds[i] == c && truth[i] == c).count();
        let fp = evaluated.iter().filter(|&&i| preds[i] == c && truth[i] != c).count();
        let fn_ = evaluated.iter().filter(|&&i| preds[i] != c && truth[i] == c).count();
        per.push((c.0, tp as f64 / (tp + fp + fn_) as f64));
    }
    let miou = per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64;
    (per, miou)
}

pub fn random_pair(seed: u64) -> (Vec<ClassId>, Vec<ClassId>) {
    let mut r = rng::stream(seed, &[]);
    let n = r.random_range(1..200);
    let k = r.random_range(1..7u16);
    let pick = |r: &mut rand_chacha::ChaCha8Rng| {
        if r.random_bool(0.1) {
            ClassId::UNKNOWN
        } else {
            ClassId(r.random_range(0..k))
        }
    };
    let preds: Vec<ClassId> = (0..n).map(|_| pick(&mut r)).collect();
    let mut truth: Vec<ClassId> = (0..n).map(|_| pick(&mut r)).collect();
    truth[0] = ClassId(0);
    (preds, truth)
}
