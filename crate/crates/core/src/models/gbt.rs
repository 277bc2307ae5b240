//! Second-order gradient-boosted trees for binary classification.
//!
//! Each round fits a regression tree to the logistic-loss gradients and
//! hessians of the current margin. Leaves hold `-G / (H + λ)` and a split
//! is kept only when its regularized gain (γ included) is positive. Trees
//! grow best-first, so `max_leaves` binds before `max_depth` when both are
//! active. Split search is exact over sorted feature values with midpoint
//! thresholds; a row goes left when `x < threshold`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{logit, sigmoid};
use crate::rng::rng_from;

/// Weight minimizing `G·w + ½(H + λ)w²`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    if !(h + lambda > 0.0) {
        return Err(Error::Numerical(format!(
            "hessian sum plus lambda must be positive (H = {h}, λ = {lambda})"
        )));
    }
    Ok(-g / (h + lambda))
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Reduction of the regularized objective from splitting a node into the
/// given children, minus `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(hl + lambda > 0.0) || !(hr + lambda > 0.0) {
        return Err(Error::Numerical(
            "child hessian sums plus lambda must be positive".into(),
        ));
    }
    Ok(0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda))
        - gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Node arena; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    /// Raw (unshrunk) leaf value reached by `row`.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.walk(|f| row[f])
    }

    fn walk(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value(feature) < threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub learning_rate: f64,
    pub subsample: f64,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub gamma: f64,
    pub colsample_bytree: f64,
    pub min_child_weight: f64,
    pub n_estimators: usize,
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            learning_rate: 0.1,
            subsample: 1.0,
            max_leaves: 31,
            max_depth: 6,
            gamma: 0.0,
            colsample_bytree: 1.0,
            min_child_weight: 1.0,
            n_estimators: 100,
            lambda: 1.0,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must lie in (0, 1], got {}", self.subsample));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad(format!(
                "colsample_bytree must lie in (0, 1], got {}",
                self.colsample_bytree
            ));
        }
        if self.max_leaves < 1 {
            return bad("max_leaves must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!(
                "min_child_weight must be non-negative, got {}",
                self.min_child_weight
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub feature_names: Vec<String>,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub config: GbtConfig,
}

impl GbtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    /// The same model restricted to its first `n` trees.
    pub fn truncated(&self, n: usize) -> GbtModel {
        GbtModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    pub fn n_internal_nodes(&self) -> usize {
        self.trees
            .iter()
            .map(|t| t.nodes.len() - t.n_leaves())
            .sum()
    }
}

pub fn predict_gbt(m: &GbtModel, ds: &Dataset) -> Result<Vec<f64>> {
    if ds.n_features() != m.feature_names.len() {
        return Err(Error::DimensionMismatch {
            expected: m.feature_names.len(),
            actual: ds.n_features(),
        });
    }
    Ok((0..ds.n_rows()).map(|r| sigmoid(m.margin(ds.row(r)))).collect())
}

/// Split counts per feature over all trees, highest first; ties by name.
/// Features never used are left out.
pub fn feature_importance(m: &GbtModel) -> Vec<(String, usize)> {
    let mut counts = vec![0usize; m.feature_names.len()];
    for tree in &m.trees {
        for node in &tree.nodes {
            if let TreeNode::Split { feature, .. } = node {
                counts[*feature] += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(f, c)| (m.feature_names[f].clone(), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    slot: usize,
    threshold: f64,
}

/// A leaf that may still be split. `rows[s]` lists the node's rows sorted
/// by the value of active feature `s`.
struct Pending {
    id: usize,
    depth: usize,
    rows: Vec<Vec<u32>>,
    g: f64,
    h: f64,
    best: Candidate,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    /// Largest gain first, then the earlier-created node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.best
            .gain
            .total_cmp(&other.best.gain)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct TreeGrower<'a> {
    cols: &'a [Vec<f64>],
    active: &'a [usize],
    gh: &'a [[f64; 2]],
    cfg: &'a GbtConfig,
    goes_left: Vec<bool>,
}

impl TreeGrower<'_> {
    fn best_split(&self, rows: &[Vec<u32>], g: f64, h: f64, depth: usize) -> Option<Candidate> {
        if depth >= self.cfg.max_depth || self.cfg.max_leaves < 2 {
            return None;
        }
        let n = rows[0].len();
        let min_n = self.cfg.min_samples_leaf;
        if n < 2 * min_n {
            return None;
        }
        let lambda = self.cfg.lambda;
        let mcw = self.cfg.min_child_weight;
        // Children are ranked by GL²/(HL+λ) + GR²/(HR+λ); the threshold on it
        // encodes "gain > 0" so only the winner needs the full formula.
        let parent = score(g, h, lambda);
        let mut best_crit = parent + 2.0 * self.cfg.gamma;
        let mut best: Option<(usize, f64)> = None;
        for (slot, &f) in self.active.iter().enumerate() {
            let col = &self.cols[f];
            let list = &rows[slot];
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut next = col[list[0] as usize];
            for k in 0..n - 1 {
                let r = list[k] as usize;
                let [gr_, hr_] = self.gh[r];
                gl += gr_;
                hl += hr_;
                let v = next;
                next = col[list[k + 1] as usize];
                if v == next || k + 1 < min_n || n - k - 1 < min_n {
                    continue;
                }
                let hr = h - hl;
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gr = g - gl;
                let (dl, dr) = (hl + lambda, hr + lambda);
                let crit = (gl * gl * dr + gr * gr * dl) / (dl * dr);
                if crit > best_crit {
                    best_crit = crit;
                    let mut threshold = v + (next - v) * 0.5;
                    if threshold <= v {
                        threshold = next;
                    }
                    best = Some((slot, threshold));
                }
            }
        }
        let (slot, threshold) = best?;
        let gain = 0.5 * (best_crit - parent) - self.cfg.gamma;
        (gain > 0.0).then_some(Candidate {
            gain,
            slot,
            threshold,
        })
    }

    fn node_sums(&self, rows: &[u32]) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &r in rows {
            let [gr, hr] = self.gh[r as usize];
            g += gr;
            h += hr;
        }
        (g, h)
    }

    fn grow(&mut self, root_rows: Vec<Vec<u32>>) -> Result<Tree> {
        let lambda = self.cfg.lambda;
        let (g, h) = self.node_sums(&root_rows[0]);
        let mut nodes = vec![TreeNode::Leaf {
            weight: leaf_weight(g, h, lambda)?,
        }];
        let mut heap = BinaryHeap::new();
        if let Some(best) = self.best_split(&root_rows, g, h, 0) {
            heap.push(Pending {
                id: 0,
                depth: 0,
                rows: root_rows,
                g,
                h,
                best,
            });
        }
        let mut leaves = 1;
        while let Some(node) = heap.pop() {
            if leaves >= self.cfg.max_leaves {
                break;
            }
            let f = self.active[node.best.slot];
            let col = &self.cols[f];
            for &r in &node.rows[0] {
                self.goes_left[r as usize] = col[r as usize] < node.best.threshold;
            }
            let mut left_rows = Vec::with_capacity(node.rows.len());
            let mut right_rows = Vec::with_capacity(node.rows.len());
            for list in &node.rows {
                let (l, r): (Vec<u32>, Vec<u32>) =
                    list.iter().partition(|&&r| self.goes_left[r as usize]);
                left_rows.push(l);
                right_rows.push(r);
            }
            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes[node.id] = TreeNode::Split {
                feature: f,
                threshold: node.best.threshold,
                left: left_id,
                right: right_id,
            };
            leaves += 1;
            for (id, rows) in [(left_id, left_rows), (right_id, right_rows)] {
                let (cg, ch) = self.node_sums(&rows[0]);
                nodes.push(TreeNode::Leaf {
                    weight: leaf_weight(cg, ch, lambda)?,
                });
                if let Some(best) = self.best_split(&rows, cg, ch, node.depth + 1) {
                    heap.push(Pending {
                        id,
                        depth: node.depth + 1,
                        rows,
                        g: cg,
                        h: ch,
                        best,
                    });
                }
            }
            let _ = (node.g, node.h);
        }
        Ok(Tree { nodes })
    }
}

/// Fits `cfg.n_estimators` trees on a dataset without missing values.
pub fn train_gbt(ds: &Dataset, cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    if ds.has_missing() {
        return Err(Error::invalid("gradient boosting needs imputed data"));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n = ds.n_rows();
    let p = ds.n_features();
    let y: Vec<f64> = ds.target().iter().map(|&t| f64::from(t)).collect();
    let base_margin = logit(ds.positive_count() as f64 / n as f64);
    let mut model = GbtModel {
        feature_names: ds.feature_names().to_vec(),
        base_margin,
        learning_rate: cfg.learning_rate,
        trees: Vec::with_capacity(cfg.n_estimators),
        config: cfg.clone(),
    };
    if p == 0 {
        model.trees = vec![Tree::leaf(0.0); cfg.n_estimators];
        return Ok(model);
    }

    let cols: Vec<Vec<f64>> = (0..p).map(|c| ds.column(c)).collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect();

    let mut rng = rng_from(cfg.seed);
    let mut margins = vec![base_margin; n];
    let mut gh = vec![[0.0; 2]; n];
    let mut in_sample = vec![true; n];
    let n_rows_tree = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols_tree = ((cfg.colsample_bytree * p as f64).round() as usize).clamp(1, p);
    let mut goes_left = vec![false; n];

    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            let prob = sigmoid(margins[i]);
            gh[i] = [prob - y[i], (prob * (1.0 - prob)).max(1e-16)];
        }
        if n_rows_tree < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in sample(&mut rng, n, n_rows_tree).into_iter() {
                in_sample[i] = true;
            }
        }
        let active: Vec<usize> = if n_cols_tree < p {
            let mut a = sample(&mut rng, p, n_cols_tree).into_vec();
            a.sort_unstable();
            a
        } else {
            (0..p).collect()
        };
        let root_rows: Vec<Vec<u32>> = active
            .iter()
            .map(|&f| {
                sorted[f]
                    .iter()
                    .copied()
                    .filter(|&r| in_sample[r as usize])
                    .collect()
            })
            .collect();
        let mut grower = TreeGrower {
            cols: &cols,
            active: &active,
            gh: &gh,
            cfg,
            goes_left: std::mem::take(&mut goes_left),
        };
        let tree = grower.grow(root_rows)?;
        goes_left = grower.goes_left;
        for (i, m) in margins.iter_mut().enumerate() {
            *m += cfg.learning_rate * tree.walk(|f| cols[f][i]);
        }
        model.trees.push(tree);
    }
    Ok(model)
}
