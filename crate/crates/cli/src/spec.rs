//! Experiment spec files for `perfxfer bench`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use perfxfer::evaluation::Experiment;
use perfxfer::learners::{LearnerSettings, StepwiseParams};
use perfxfer::transfer::{Strategy, DEFAULT_BUDGET_FRACTION};
use perfxfer::{ConfigurationSpace, LearnerKind, MeasurementDataset, Metric};
use serde::Deserialize;

fn default_budget_fraction() -> f64 {
    DEFAULT_BUDGET_FRACTION
}

fn default_test_count() -> usize {
    10
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_learners() -> Vec<LearnerKind> {
    LearnerKind::ALL.to_vec()
}

fn default_fs_epsilon() -> f64 {
    StepwiseParams::default().fs_epsilon
}

fn default_be_alpha() -> f64 {
    StepwiseParams::default().be_alpha
}

/// Paths are relative to the spec file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub space: PathBuf,
    pub source: PathBuf,
    pub targets: Vec<PathBuf>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerKind>,
    pub metric: Metric,
    #[serde(default = "default_budget_fraction")]
    pub budget_fraction: f64,
    #[serde(default = "default_fs_epsilon")]
    pub fs_epsilon: f64,
    #[serde(default = "default_be_alpha")]
    pub be_alpha: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub settings: LearnerSettings,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: ExperimentSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.space = base.join(&spec.space);
        spec.source = base.join(&spec.source);
        for t in &mut spec.targets {
            *t = base.join(&*t);
        }
        spec.out = base.join(&spec.out);
        spec.check_files()?;
        Ok(spec)
    }

    fn check_files(&self) -> Result<()> {
        for p in std::iter::once(&self.space).chain([&self.source]).chain(&self.targets) {
            if !p.is_file() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        if self.targets.is_empty() {
            bail!("spec lists no target datasets");
        }
        Ok(())
    }

    pub fn experiment(&self, workers: usize) -> Result<Experiment> {
        let space = Arc::new(
            ConfigurationSpace::load(&self.space).with_context(|| format!("loading {}", self.space.display()))?,
        );
        let load = |p: &PathBuf| {
            MeasurementDataset::load_csv(p, Arc::clone(&space)).with_context(|| format!("loading {}", p.display()))
        };
        let source = load(&self.source)?;
        let targets = self.targets.iter().map(load).collect::<Result<Vec<_>>>()?;
        let mut exp = Experiment::new(source, targets, self.metric);
        exp.strategies = self.strategies.clone();
        exp.learners = self.learners.clone();
        exp.budget_fraction = self.budget_fraction;
        exp.stepwise = StepwiseParams {
            fs_epsilon: self.fs_epsilon,
            be_alpha: self.be_alpha,
        };
        exp.settings = self.settings;
        exp.seeds = self.seeds.clone();
        exp.test_count = self.test_count;
        exp.workers = workers;
        Ok(exp)
    }
}
