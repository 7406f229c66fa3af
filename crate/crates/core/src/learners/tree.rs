//! CART regression trees.
//!
//! Splits are chosen greedily by sum-of-squares reduction over every
//! (feature, midpoint between adjacent distinct values) candidate. Ties go to
//! the lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(12),
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTreeModel {
    pub input_dim: usize,
    pub params: TreeParams,
    pub nodes: Vec<Node>,
}

impl RegressionTreeModel {
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Index of the leaf a feature row lands in.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x[*feature] <= *threshold { *left } else { *right };
        }
        at
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub fn fit_tree(train: &TrainingSet, params: TreeParams) -> Result<RegressionTreeModel> {
    let indices: Vec<usize> = (0..train.len()).collect();
    fit_tree_on(train, indices, params, &mut |d| (0..d).collect())
}

/// Fits on the rows listed in `indices` (repeats allowed, as in a bootstrap
/// resample). `features` yields, per split, the ascending feature indices to
/// consider.
pub(crate) fn fit_tree_on(
    train: &TrainingSet,
    indices: Vec<usize>,
    params: TreeParams,
    features: &mut dyn FnMut(usize) -> Vec<usize>,
) -> Result<RegressionTreeModel> {
    if indices.is_empty() {
        return Err(Error::EmptyInput);
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
    }
    let mut builder = Builder {
        train,
        params,
        nodes: Vec::new(),
        features,
    };
    builder.grow(indices, 0);
    Ok(RegressionTreeModel {
        input_dim: train.dimension(),
        params,
        nodes: builder.nodes,
    })
}

struct Builder<'a, 'f> {
    train: &'a TrainingSet,
    params: TreeParams,
    nodes: Vec<Node>,
    features: &'f mut dyn FnMut(usize) -> Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_, '_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let y = &self.train.targets;
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            samples: n,
        });

        let constant = idx.iter().all(|&i| y[i] == y[idx[0]]);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if constant || depth_reached || n < 2 * self.params.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&idx, sum) else {
            return at;
        };
        let rows = &self.train.rows;
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| rows[i][best.feature] <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&mut self, idx: &[usize], total: f64) -> Option<BestSplit> {
        let rows = &self.train.rows;
        let y = &self.train.targets;
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in (self.features)(self.train.dimension()) {
            order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += y[order[k - 1]];
                let (lo, hi) = (rows[order[k - 1]][f], rows[order[k]][f]);
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: lo + (hi - lo) / 2.0,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}
