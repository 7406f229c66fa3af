//! Random forests of CART trees with bootstrap resampling and per-split
//! feature subsets.

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, RegressionTreeModel, TreeParams};
use super::TrainingSet;
use crate::dataset::rng_from_seed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `ceil(d / 3)`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn resolved_features(&self, dimension: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| dimension.div_ceil(3))
            .clamp(1, dimension.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub input_dim: usize,
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<RegressionTreeModel>,
}

impl RandomForestModel {
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict_features(x)).sum();
        total / self.trees.len() as f64
    }
}

pub fn fit_forest(train: &TrainingSet, params: ForestParams, seed: u64) -> Result<RandomForestModel> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    let d = train.dimension();
    let k = params.resolved_features(d);
    let n = train.len();
    let mut master = rng_from_seed(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut rng = rng_from_seed(master.next_u64());
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut choose = |dim: usize| -> Vec<usize> {
            if k >= dim {
                (0..dim).collect()
            } else {
                let mut f = index::sample(&mut rng, dim, k).into_vec();
                f.sort_unstable();
                f
            }
        };
        trees.push(fit_tree_on(train, indices, params.tree, &mut choose)?);
    }
    Ok(RandomForestModel {
        input_dim: d,
        params,
        seed,
        trees,
    })
}
