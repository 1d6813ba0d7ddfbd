//! Random forest classifier with split-frequency feature importance.
//!
//! Trees are grown on bootstrap resamples with Gini impurity, candidate
//! thresholds at midpoints between consecutive distinct values and a fresh
//! feature subsample at every node. Split quality is compared in exact
//! integer arithmetic, so ties are real ties and are always resolved the
//! same way: lowest feature index first, then smallest threshold.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng;

use crate::config::KvConfig;
use crate::rng;
use crate::types::{ClassId, Dataset, MaterialClass};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub features_per_node: usize,
    pub min_samples_leaf: usize,
    /// Draw each tree's training set with replacement; otherwise every tree
    /// sees the full set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 50,
            features_per_node: 16,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    /// Reads `<prefix>.n_trees`, `<prefix>.max_depth`, ... falling back to
    /// [`ForestParams::default`] for absent keys.
    pub fn from_config(cfg: &KvConfig, prefix: &str) -> Result<Self> {
        let d = ForestParams::default();
        let k = |f: &str| format!("{prefix}.{f}");
        let p = ForestParams {
            n_trees: cfg.get_or(&k("n_trees"), d.n_trees)?,
            max_depth: cfg.get_or(&k("max_depth"), d.max_depth)?,
            features_per_node: cfg.get_or(&k("features_per_node"), d.features_per_node)?,
            min_samples_leaf: cfg.get_or(&k("min_samples_leaf"), d.min_samples_leaf)?,
            bootstrap: cfg.get_or(&k("bootstrap"), d.bootstrap)?,
            seed: cfg.get_or(&k("seed"), d.seed)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::param("n_trees", "must be >= 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::param("max_depth", "must be >= 1"));
        }
        if self.features_per_node == 0 {
            return Err(Error::param("features_per_node", "must be >= 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::param("min_samples_leaf", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        votes: Vec<u32>,
    },
}

/// A tree stored as a node arena; the root is node 0. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_votes(&self, x: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { votes } => return votes,
            }
        }
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Internal { .. }))
            .count()
    }

    /// Depth of the deepest node (root has depth 0).
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            max = max.max(d);
            if let TreeNode::Internal { left, right, .. } = &self.nodes[at] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        max
    }

    fn check(&self, n_features: usize, n_classes: usize) -> Result<()> {
        let bad = |m: &str| Error::param("tree", m);
        if self.nodes.is_empty() {
            return Err(bad("empty tree"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err(bad("split feature out of range"));
                    }
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(bad("child index out of order"));
                    }
                }
                TreeNode::Leaf { votes } => {
                    if votes.len() != n_classes {
                        return Err(bad("leaf vote width differs from class count"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    class_table: Vec<MaterialClass>,
    n_features: usize,
    params: ForestParams,
    split_counts: Vec<u64>,
}

impl Forest {
    /// Reassembles a forest, e.g. from a checkpoint. Split counts must agree
    /// with the trees.
    pub fn from_parts(
        trees: Vec<Tree>,
        class_table: Vec<MaterialClass>,
        n_features: usize,
        params: ForestParams,
        split_counts: Vec<u64>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::param("trees", "forest needs at least one tree"));
        }
        for t in &trees {
            t.check(n_features, class_table.len())?;
        }
        if split_counts != count_splits(&trees, n_features) {
            return Err(Error::param("split_counts", "do not match tree structure"));
        }
        Ok(Forest {
            trees,
            class_table,
            n_features,
            params,
            split_counts,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn class_table(&self) -> &[MaterialClass] {
        &self.class_table
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn split_counts(&self) -> &[u64] {
        &self.split_counts
    }

    pub fn internal_count(&self) -> usize {
        self.trees.iter().map(Tree::internal_count).sum()
    }

    /// Leaf votes summed over all trees.
    pub fn vote_totals(&self, x: &[f64]) -> Vec<u64> {
        let mut totals = vec![0u64; self.class_table.len()];
        for tree in &self.trees {
            for (t, &v) in totals.iter_mut().zip(tree.leaf_votes(x)) {
                *t += v as u64;
            }
        }
        totals
    }

    /// Majority class over summed leaf votes; ties go to the lowest id.
    pub fn predict(&self, x: &[f64]) -> ClassId {
        assert_eq!(x.len(), self.n_features, "feature vector width");
        argmax_lowest(&self.vote_totals(x))
    }

    pub fn predict_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Vec<ClassId> {
        rows.iter().map(|r| self.predict(r.as_ref())).collect()
    }
}

pub(crate) fn argmax_lowest(totals: &[u64]) -> ClassId {
    let mut best = 0;
    for (i, &v) in totals.iter().enumerate() {
        if v > totals[best] {
            best = i;
        }
    }
    ClassId(best as u16)
}

fn count_splits(trees: &[Tree], n_features: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_features];
    for t in trees {
        for n in &t.nodes {
            if let TreeNode::Internal { feature, .. } = n {
                counts[*feature] += 1;
            }
        }
    }
    counts
}

/// Trains on a waveform dataset.
pub fn train_forest(train: &Dataset, params: &ForestParams) -> Result<Forest> {
    train_on_rows(
        &train.rows(),
        &train.labels(),
        train.class_table(),
        params,
    )
}

/// Trains on arbitrary feature rows of equal width.
pub fn train_on_rows<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[ClassId],
    class_table: &[MaterialClass],
    params: &ForestParams,
) -> Result<Forest> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let n_features = rows[0].as_ref().len();
    if n_features == 0 {
        return Err(Error::param("rows", "feature vectors are empty"));
    }
    if let Some(r) = rows.iter().find(|r| r.as_ref().len() != n_features) {
        return Err(Error::param(
            "rows",
            format!("ragged rows: {} vs {}", r.as_ref().len(), n_features),
        ));
    }
    if let Some(r) = rows.iter().find(|r| r.as_ref().iter().any(|v| !v.is_finite())) {
        let _ = r;
        return Err(Error::param("rows", "non-finite feature value"));
    }
    let n_classes = class_table.len();
    for (i, l) in labels.iter().enumerate() {
        if l.is_unknown() {
            return Err(Error::UnknownLabel { sample: i });
        }
        if l.index() >= n_classes {
            return Err(Error::LabelOutOfRange {
                sample: i,
                label: l.0,
                classes: n_classes,
            });
        }
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(Error::SingleClass);
    }

    let grower = Grower {
        rows: rows.iter().map(AsRef::as_ref).collect(),
        labels: labels.iter().map(|l| l.index()).collect(),
        n_classes,
        n_features,
        params,
    };
    let trees: Vec<Tree> = (0..params.n_trees).map(|t| grower.grow(t as u64)).collect();
    let split_counts = count_splits(&trees, n_features);
    Ok(Forest {
        trees,
        class_table: class_table.to_vec(),
        n_features,
        params: params.clone(),
        split_counts,
    })
}

/// Weighted child purity `sum(l^2)/n_l + sum(r^2)/n_r` kept as an exact
/// fraction; larger is better.
#[derive(Clone, Copy, Debug)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn new(sum_sq_left: u64, n_left: u64, sum_sq_right: u64, n_right: u64) -> Self {
        Purity {
            num: sum_sq_left as u128 * n_right as u128 + sum_sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

struct Grower<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<usize>,
    n_classes: usize,
    n_features: usize,
    params: &'a ForestParams,
}

impl Grower<'_> {
    fn grow(&self, tree_index: u64) -> Tree {
        let mut rng = rng::stream(self.params.seed, &[tree_index]);
        let n = self.rows.len();
        let sample: Vec<usize> = if self.params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };

        let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { votes: Vec::new() }];
        // (node slot, sample indices, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        while let Some((slot, idx, depth)) = stack.pop() {
            let votes = self.class_counts(&idx);
            let pure = votes.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure
                || depth >= self.params.max_depth
                || idx.len() < 2 * self.params.min_samples_leaf
            {
                None
            } else {
                self.best_split(&idx, &votes, &mut rng)
            };
            match split {
                None => nodes[slot] = TreeNode::Leaf { votes },
                Some(c) => {
                    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                        .iter()
                        .partition(|&&i| self.rows[i][c.feature] <= c.threshold);
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(TreeNode::Leaf { votes: Vec::new() });
                    nodes.push(TreeNode::Leaf { votes: Vec::new() });
                    nodes[slot] = TreeNode::Internal {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    stack.push((right, right_idx, depth + 1));
                    stack.push((left, left_idx, depth + 1));
                }
            }
        }
        Tree { nodes }
    }

    fn class_counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn best_split(&self, idx: &[usize], parent: &[u32], rng: &mut impl Rng) -> Option<Candidate> {
        let m = self.params.features_per_node.min(self.n_features);
        let mut features = index::sample(rng, self.n_features, m).into_vec();
        features.sort_unstable();

        let n = idx.len() as u64;
        let parent_sq: u64 = parent.iter().map(|&c| (c as u64) * (c as u64)).sum();
        // Parent purity sum(p^2)/n expressed with the same fraction layout.
        let parent_purity = Purity {
            num: parent_sq as u128,
            den: n as u128,
        };
        let min_leaf = self.params.min_samples_leaf as u64;

        let mut best: Option<Candidate> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        let mut left = vec![0u32; self.n_classes];
        for &f in &features {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.rows[i][f], self.labels[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[order.len() - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|c| *c = 0);
            let mut sq_left = 0u64;
            let mut sq_right = parent_sq;
            for k in 1..order.len() {
                let c = order[k - 1].1;
                let l = left[c] as u64;
                let r = parent[c] as u64 - l;
                sq_left += 2 * l + 1;
                sq_right -= 2 * r - 1;
                left[c] += 1;

                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let n_left = k as u64;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let purity = Purity::new(sq_left, n_left, sq_right, n_right);
                if purity.cmp(&parent_purity) != Ordering::Greater {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => purity.cmp(&b.purity) == Ordering::Greater,
                };
                if better {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        purity,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint that always separates `lo < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

/// Split counts normalised to sum to one.
pub fn feature_importance(forest: &Forest) -> Result<Vec<f64>> {
    let total: u64 = forest.split_counts.iter().sum();
    if total == 0 {
        return Err(Error::NoInternalNodes);
    }
    Ok(forest
        .split_counts
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect())
}
