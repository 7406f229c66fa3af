//! Regression toolbox: least squares, stepwise term selection, CART trees,
//! random forests and a small neural network, behind one prediction
//! interface.

mod forest;
mod model;
mod nn;
mod ols;
mod stepwise;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_forest, ForestParams, RandomForestModel};
pub use model::{PerformanceModel, ShiftModel, MODEL_FORMAT};
pub use nn::{fit_nn, DenseLayer, NeuralNetModel, NnParams, Optimizer, HIDDEN};
pub use ols::{fit_ols, OlsFit};
pub use stepwise::{stepwise_fit, LinearTermModel, Step, StepwiseFit, StepwiseParams, PRUNE_THRESHOLD};
pub use tree::{fit_tree, Node, RegressionTreeModel, TreeParams};

/// Feature rows with one target each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch(rows.len(), targets.len()));
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::InvalidParameter("ragged feature rows".into()));
            }
        }
        Ok(TrainingSet { rows, targets })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Learner used for source and target performance models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Rt,
    Nn,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 2] = [LearnerKind::Rt, LearnerKind::Nn];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Rt => "rt",
            LearnerKind::Nn => "nn",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rt" => Ok(LearnerKind::Rt),
            "nn" => Ok(LearnerKind::Nn),
            other => Err(Error::UnknownName {
                kind: "learner",
                name: other.to_string(),
            }),
        }
    }
}

/// Hyperparameters for every learner the transfer strategies may train.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSettings {
    pub tree: TreeParams,
    pub nn: NnParams,
    /// Forest used by the nonlinear model shift.
    pub shift_forest: ForestParams,
}

/// Fits a model of `kind` on `train`.
pub fn fit_learner(
    kind: LearnerKind,
    train: &TrainingSet,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<PerformanceModel> {
    match kind {
        LearnerKind::Rt => Ok(PerformanceModel::Tree(fit_tree(train, settings.tree)?)),
        LearnerKind::Nn => Ok(PerformanceModel::NeuralNet(fit_nn(train, settings.nn, seed)?)),
    }
}
