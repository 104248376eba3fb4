//! CART-style classification tree with Gini impurity.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, ModelMetadata, TrainedModel};
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Decreases at or below this are treated as zero (float noise between
/// equally impure partitions).
pub(crate) const MIN_DECREASE: f64 = 1e-12;

/// Gini impurity `1 − Σ p_c²` of a class histogram.
pub fn gini(counts: &[usize]) -> Result<f64> {
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Input("gini impurity of an empty node".into()));
    }
    Ok(gini_unchecked(counts))
}

pub(crate) fn gini_unchecked(counts: &[usize]) -> f64 {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let squares: u64 = counts.iter().map(|&c| (c as u64) * (c as u64)).sum();
    1.0 - squares as f64 / (total as f64 * total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
    /// Features considered per node; `None` uses all of them.
    #[serde(default)]
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 16,
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
            max_features: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if let Some(m) = self.max_features {
            if m == 0 || m > dim {
                return Err(Error::Config(format!("max_features must lie in 1..={dim}, got {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<usize>,
        class: u8,
    },
}

/// Nodes in preorder; the root is node 0. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
}

impl DecisionTree {
    pub fn leaf_for(&self, x: ArrayView1<'_, f64>) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { counts, .. } => return counts,
            }
        }
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { class, .. } => return *class,
            }
        }
    }

    /// Class fractions of the reached leaf.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let counts = self.leaf_for(x);
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Internal { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at] {
                TreeNode::Internal { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    // Adjacent floats: keep `b` strictly on the right.
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Best Gini split over `features` among candidate thresholds at midpoints
/// of consecutive distinct values. Ties prefer the lower feature index, then
/// the lower threshold. `None` when no split decreases impurity.
pub fn best_split(x: ArrayView2<'_, f64>, y: &[u8], feature_subset: &[usize]) -> Option<Split> {
    let n_classes = y.iter().copied().max().map_or(0, |m| m as usize + 1);
    let rows: Vec<usize> = (0..x.nrows()).collect();
    best_split_rows(x, y, &rows, feature_subset, n_classes, 1)
}

pub(crate) fn best_split_rows(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    rows: &[usize],
    feature_subset: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<Split> {
    let m = rows.len();
    if m < 2 || m < 2 * min_leaf {
        return None;
    }
    let mut parent = vec![0usize; n_classes];
    for &r in rows {
        parent[y[r] as usize] += 1;
    }
    let parent_gini = gini_unchecked(&parent);

    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut order = rows.to_vec();
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in &features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&parent);
        for i in 0..m - 1 {
            let cls = y[order[i]] as usize;
            left[cls] += 1;
            right[cls] -= 1;
            let (a, b) = (x[[order[i], f]], x[[order[i + 1], f]]);
            if a >= b {
                continue;
            }
            let n_left = i + 1;
            let n_right = m - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let weighted = (n_left as f64 * gini_unchecked(&left)
                + n_right as f64 * gini_unchecked(&right))
                / m as f64;
            let decrease = parent_gini - weighted;
            // Decreases within MIN_DECREASE of the incumbent are ties.
            if decrease > MIN_DECREASE
                && best.is_none_or(|s| decrease > s.impurity_decrease + MIN_DECREASE)
            {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(a, b),
                    impurity_decrease: decrease,
                });
            }
        }
    }
    best
}

fn leaf(counts: Vec<usize>) -> TreeNode {
    let class = argmax(ArrayView1::from(
        &counts.iter().map(|&c| c as f64).collect::<Vec<_>>(),
    )) as u8;
    TreeNode::Leaf { counts, class }
}

/// Grows a tree over `rows` (repeats allowed, as in a bootstrap sample).
pub(crate) fn grow(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    rows: Vec<usize>,
    n_classes: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let d = x.ncols();
    let mut nodes: Vec<TreeNode> = vec![leaf(vec![0; n_classes])];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((at, rows, depth)) = stack.pop() {
        let mut counts = vec![0usize; n_classes];
        for &r in &rows {
            counts[y[r] as usize] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= params.max_depth || rows.len() < 2 * params.min_samples_leaf {
            nodes[at] = leaf(counts);
            continue;
        }
        let features: Vec<usize> = match params.max_features {
            Some(k) if k < d => index::sample(rng, d, k).into_vec(),
            _ => (0..d).collect(),
        };
        let split = best_split_rows(x, y, &rows, &features, n_classes, params.min_samples_leaf)
            .filter(|s| s.impurity_decrease >= params.min_impurity_decrease);
        let Some(split) = split else {
            nodes[at] = leaf(counts);
            continue;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| x[[r, split.feature]] <= split.threshold);
        let left = nodes.len();
        nodes.push(leaf(vec![0; n_classes]));
        let right = nodes.len();
        nodes.push(leaf(vec![0; n_classes]));
        nodes[at] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        // Right first so the left subtree is expanded first.
        stack.push((right, r_rows, depth + 1));
        stack.push((left, l_rows, depth + 1));
    }
    DecisionTree { nodes, n_classes }
}

pub fn fit_tree(train: &EmbeddedDataset, params: &TreeParams) -> Result<TrainedModel> {
    let y = train.require_labels()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("decision tree: training set is empty".into()));
    }
    params.validate(train.dim())?;
    let metadata = ModelMetadata::for_dataset(train, params);
    let mut rng = seed::rng(params.seed);
    let tree = grow(
        train.features().view(),
        y,
        (0..train.len()).collect(),
        metadata.n_classes(),
        params,
        &mut rng,
    );
    Ok(TrainedModel {
        metadata,
        model: super::Model::Tree(tree),
    })
}
