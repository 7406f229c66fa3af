use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LinearTermModel, NeuralNetModel, RandomForestModel, RegressionTreeModel};
use crate::error::{Error, Result};
use crate::space::{Configuration, ConfigurationSpace};

pub const MODEL_FORMAT: &str = "perfxfer-model/1";

/// Map from a source-model prediction to a target prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftModel {
    Linear { intercept: f64, slope: f64 },
    Forest { forest: RandomForestModel },
}

impl ShiftModel {
    pub fn apply(&self, source_prediction: f64) -> f64 {
        match self {
            ShiftModel::Linear { intercept, slope } => intercept + slope * source_prediction,
            ShiftModel::Forest { forest } => forest.predict_features(&[source_prediction]),
        }
    }
}

/// Any fitted model mapping a configuration to a metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerformanceModel {
    Linear(LinearTermModel),
    Tree(RegressionTreeModel),
    Forest(RandomForestModel),
    NeuralNet(NeuralNetModel),
    /// A source model followed by a learned prediction shift.
    Shifted {
        base: Box<PerformanceModel>,
        shift: ShiftModel,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    model: PerformanceModel,
}

impl PerformanceModel {
    pub fn input_dim(&self) -> usize {
        match self {
            PerformanceModel::Linear(m) => m.input_dim,
            PerformanceModel::Tree(m) => m.input_dim,
            PerformanceModel::Forest(m) => m.input_dim,
            PerformanceModel::NeuralNet(m) => m.input_dim,
            PerformanceModel::Shifted { base, .. } => base.input_dim(),
        }
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        match self {
            PerformanceModel::Linear(m) => m.predict_features(x),
            PerformanceModel::Tree(m) => m.predict_features(x),
            PerformanceModel::Forest(m) => m.predict_features(x),
            PerformanceModel::NeuralNet(m) => m.predict_features(x),
            PerformanceModel::Shifted { base, shift } => shift.apply(base.predict_features(x)),
        }
    }

    pub fn predict(&self, config: &Configuration, space: &ConfigurationSpace) -> Result<f64> {
        if space.dimension() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: space.dimension(),
            });
        }
        let x = space.encode(config)?;
        Ok(self.predict_features(&x))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("models serialize to json")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::UnsupportedFormat(header.format));
        }
        let file: ModelFile = serde_json::from_str(text)?;
        file.model.check_shapes()?;
        Ok(file.model)
    }

    fn check_shapes(&self) -> Result<()> {
        if let PerformanceModel::Shifted { base, shift } = self {
            if let ShiftModel::Forest { forest } = shift {
                if forest.input_dim != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        actual: forest.input_dim,
                    });
                }
            }
            base.check_shapes()?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
