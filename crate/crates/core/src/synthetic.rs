//! Paired source/target environments with known response surfaces.
//!
//! A surface is a sparse degree-2 polynomial over encoded features. The
//! target environment applies a [`ShiftSpec`] to the noiseless source
//! response; each environment then gets its own independent Gaussian noise.

use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{rng_from_seed, EnvironmentId, MeasurementDataset, MeasurementRecord, Metric};
use crate::error::{Error, Result};
use crate::space::{Configuration, ConfigurationSpace, OptionSpec};
use crate::terms::{Influence, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    #[serde(flatten)]
    pub term: Term,
    pub coefficient: f64,
}

impl WeightedTerm {
    pub fn new(term: Term, coefficient: f64) -> Self {
        WeightedTerm { term, coefficient }
    }
}

/// Noiseless polynomial response plus its measurement noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSurface {
    pub terms: Vec<WeightedTerm>,
    /// Constant added so the response is positive everywhere on the space.
    pub offset: f64,
    pub noise_sd: f64,
}

impl GroundTruthSurface {
    /// Validates the terms against `space` and shifts the response to be positive.
    pub fn new(space: &ConfigurationSpace, terms: Vec<WeightedTerm>, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidSurface(format!("noise_sd must be >= 0, got {noise_sd}")));
        }
        let mut seen = std::collections::HashSet::new();
        for wt in &terms {
            wt.term.validate(space.dimension())?;
            if !wt.coefficient.is_finite() {
                return Err(Error::InvalidSurface(format!("non-finite coefficient on {}", wt.term)));
            }
            if !seen.insert(wt.term) {
                return Err(Error::InvalidSurface(format!("term {} listed twice", wt.term)));
            }
        }
        let mut surface = GroundTruthSurface {
            terms,
            offset: 0.0,
            noise_sd,
        };
        let min = space
            .enumerate()
            .map(|c| surface.response(&space.encode_unchecked(&c)))
            .fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            surface.offset = min.abs() + 1.0;
        }
        Ok(surface)
    }

    /// Noiseless response at encoded features `x`.
    pub fn response(&self, x: &[f64]) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|wt| wt.coefficient * wt.term.value(x))
                .sum::<f64>()
    }

    /// Support of the polynomial: options and pairs with nonzero coefficients.
    pub fn true_influential(&self) -> Influence {
        Influence::from_terms(self.terms.iter().filter(|wt| wt.coefficient != 0.0).map(|wt| &wt.term))
    }

    /// Non-intercept terms with nonzero coefficient, sorted.
    pub fn support(&self) -> Vec<Term> {
        let mut t: Vec<Term> = self
            .terms
            .iter()
            .filter(|wt| wt.coefficient != 0.0 && wt.term != Term::Intercept)
            .map(|wt| wt.term)
            .collect();
        t.sort();
        t
    }
}

/// Free function form of [`GroundTruthSurface::true_influential`].
pub fn true_influential(truth: &GroundTruthSurface) -> Influence {
    truth.true_influential()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDelta {
    #[serde(flatten)]
    pub term: Term,
    pub delta: f64,
}

/// How the target response derives from the noiseless source response `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSpec {
    Identity,
    /// `a * y + b`
    Linear {
        a: f64,
        b: f64,
    },
    /// `a * y^gamma + b`
    Power {
        a: f64,
        gamma: f64,
        b: f64,
    },
    /// `y + sum(delta * term(x))`
    TermPerturbation {
        deltas: Vec<TermDelta>,
    },
}

impl ShiftSpec {
    pub fn validate(&self, space: &ConfigurationSpace) -> Result<()> {
        match self {
            ShiftSpec::Identity => Ok(()),
            ShiftSpec::Linear { a, b } => {
                if !(*a > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidShift(format!("linear shift needs a > 0, got a = {a}")));
                }
                Ok(())
            }
            ShiftSpec::Power { a, gamma, b } => {
                if !(*a > 0.0 && *gamma > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidShift(format!(
                        "power shift needs a > 0 and gamma > 0, got a = {a}, gamma = {gamma}"
                    )));
                }
                Ok(())
            }
            ShiftSpec::TermPerturbation { deltas } => {
                for d in deltas {
                    d.term.validate(space.dimension())?;
                    if !d.delta.is_finite() {
                        return Err(Error::InvalidShift("non-finite delta".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Target response for source response `y` at encoded features `x`.
    pub fn apply(&self, y: f64, x: &[f64]) -> f64 {
        match self {
            ShiftSpec::Identity => y,
            ShiftSpec::Linear { a, b } => a * y + b,
            ShiftSpec::Power { a, gamma, b } => a * y.powf(*gamma) + b,
            ShiftSpec::TermPerturbation { deltas } => y + deltas.iter().map(|d| d.delta * d.term.value(x)).sum::<f64>(),
        }
    }
}

/// Everything needed to generate a source/target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub space: ConfigurationSpace,
    pub terms: Vec<WeightedTerm>,
    pub noise_sd: f64,
    /// Target noise level; defaults to `noise_sd`.
    #[serde(default)]
    pub target_noise_sd: Option<f64>,
    pub shift: ShiftSpec,
    pub seed: u64,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_source_env")]
    pub source_env: EnvironmentId,
    #[serde(default = "default_target_env")]
    pub target_env: EnvironmentId,
}

fn default_metric() -> Metric {
    Metric::InferenceTime
}

fn default_source_env() -> EnvironmentId {
    EnvironmentId::new("src", "model", "workload").unwrap()
}

fn default_target_env() -> EnvironmentId {
    EnvironmentId::new("tgt", "model", "workload").unwrap()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceRef {
    Path(String),
    Inline(ConfigurationSpace),
}

#[derive(Deserialize)]
struct ScenarioFile {
    space: SpaceRef,
    terms: Vec<WeightedTerm>,
    noise_sd: f64,
    #[serde(default)]
    target_noise_sd: Option<f64>,
    shift: ShiftSpec,
    seed: u64,
    #[serde(default = "default_metric")]
    metric: Metric,
    #[serde(default = "default_source_env")]
    source_env: EnvironmentId,
    #[serde(default = "default_target_env")]
    target_env: EnvironmentId,
}

impl Scenario {
    /// Parses a scenario; a `space = "<path>"` reference resolves against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let space = match file.space {
            SpaceRef::Inline(space) => space,
            SpaceRef::Path(p) => ConfigurationSpace::load(base_dir.join(p))?,
        };
        for env in [&file.source_env, &file.target_env] {
            EnvironmentId::new(env.hardware.clone(), env.model.clone(), env.workload.clone())?;
        }
        Ok(Scenario {
            space,
            terms: file.terms,
            noise_sd: file.noise_sd,
            target_noise_sd: file.target_noise_sd,
            shift: file.shift,
            seed: file.seed,
            metric: file.metric,
            source_env: file.source_env,
            target_env: file.target_env,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn generate(&self) -> Result<SyntheticPair> {
        let surface = GroundTruthSurface::new(&self.space, self.terms.clone(), self.noise_sd)?;
        generate_pair_with(
            Arc::new(self.space.clone()),
            surface,
            self.target_noise_sd.unwrap_or(self.noise_sd),
            &self.shift,
            self.seed,
            self.metric,
            (self.source_env.clone(), self.target_env.clone()),
        )
    }
}

/// Generated environments and the truth they came from.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub source: MeasurementDataset,
    pub target: MeasurementDataset,
    pub truth: GroundTruthSurface,
    pub shift: ShiftSpec,
    pub target_noise_sd: f64,
}

impl SyntheticPair {
    /// Noiseless source response at a configuration.
    pub fn source_truth(&self, config: &Configuration) -> f64 {
        let x = self.source.space().encode_unchecked(config);
        self.truth.response(&x)
    }

    /// Noiseless target response at a configuration.
    pub fn target_truth(&self, config: &Configuration) -> f64 {
        let x = self.source.space().encode_unchecked(config);
        self.shift.apply(self.truth.response(&x), &x)
    }
}

/// Full-factorial source and target datasets over `space`, deterministic per seed.
pub fn generate_pair(
    space: Arc<ConfigurationSpace>,
    surface: GroundTruthSurface,
    shift: &ShiftSpec,
    seed: u64,
) -> Result<SyntheticPair> {
    let noise = surface.noise_sd;
    generate_pair_with(
        space,
        surface,
        noise,
        shift,
        seed,
        Metric::InferenceTime,
        (default_source_env(), default_target_env()),
    )
}

fn noisy(value: f64, normal: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    match normal {
        Some(n) => value + n.sample(rng),
        None => value,
    }
}

fn normal(sd: f64) -> Result<Option<Normal<f64>>> {
    if sd == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sd)
        .map(Some)
        .map_err(|e| Error::InvalidSurface(format!("noise: {e}")))
}

fn generate_pair_with(
    space: Arc<ConfigurationSpace>,
    truth: GroundTruthSurface,
    target_noise_sd: f64,
    shift: &ShiftSpec,
    seed: u64,
    metric: Metric,
    envs: (EnvironmentId, EnvironmentId),
) -> Result<SyntheticPair> {
    shift.validate(&space)?;
    if !(target_noise_sd >= 0.0 && target_noise_sd.is_finite()) {
        return Err(Error::InvalidSurface(format!(
            "target noise sd must be >= 0, got {target_noise_sd}"
        )));
    }
    let source_noise = normal(truth.noise_sd)?;
    let target_noise = normal(target_noise_sd)?;
    let mut source_rng = rng_from_seed(seed);
    let mut target_rng = rng_from_seed(seed);
    target_rng.set_stream(1);

    let n = space.cardinality();
    let mut source_records = Vec::with_capacity(n);
    let mut target_records = Vec::with_capacity(n);
    for config in space.enumerate() {
        let x = space.encode_unchecked(&config);
        let y = truth.response(&x);
        let shifted = shift.apply(y, &x);
        let s = noisy(y, &source_noise, &mut source_rng);
        let t = noisy(shifted, &target_noise, &mut target_rng);
        for v in [shifted, s, t] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::PositivityViolated(v));
            }
        }
        source_records.push(MeasurementRecord {
            config: config.clone(),
            metric,
            value: s,
            replicate: 0,
        });
        target_records.push(MeasurementRecord {
            config,
            metric,
            value: t,
            replicate: 0,
        });
    }
    Ok(SyntheticPair {
        source: MeasurementDataset::new(envs.0, Arc::clone(&space), source_records)?,
        target: MeasurementDataset::new(envs.1, space, target_records)?,
        truth,
        shift: shift.clone(),
        target_noise_sd,
    })
}

/// Ready-made scenarios.
pub mod presets {
    use super::*;

    /// Four hardware-style options: cpu_status {0,1}, cpu cores 8 levels, gpu
    /// frequency 16 levels, memory frequency 16 levels. 4,096 configurations.
    pub fn hardware_space_4096() -> ConfigurationSpace {
        ConfigurationSpace::new(vec![
            OptionSpec::new("cpu_status", "on/off", vec![0.0, 1.0]),
            OptionSpec::new("cpu_freq", "MHz", (0..8).map(|i| 345.6 + 230.4 * i as f64).collect()),
            OptionSpec::new("gpu_freq", "MHz", (0..16).map(|i| 76.8 + 76.8 * i as f64).collect()),
            OptionSpec::new("emc_freq", "MHz", (0..16).map(|i| 40.8 + 100.0 * i as f64).collect()),
        ])
        .expect("valid preset space")
    }

    /// Energy scenario whose response spans more than a factor of 20 across the space.
    ///
    /// Energy falls steeply with GPU frequency and rises with memory frequency;
    /// CPU status and CPU frequency do not matter.
    pub fn wide_range_energy(seed: u64) -> Scenario {
        Scenario {
            space: hardware_space_4096(),
            terms: vec![
                WeightedTerm::new(Term::Intercept, 100.0),
                WeightedTerm::new(Term::Main(2), -150.0),
                WeightedTerm::new(Term::Quadratic(2), 55.0),
                WeightedTerm::new(Term::Main(3), 20.0),
                WeightedTerm::new(Term::Interaction(2, 3), -10.0),
            ],
            noise_sd: 0.0,
            target_noise_sd: None,
            shift: ShiftSpec::Identity,
            seed,
            metric: Metric::Energy,
            source_env: EnvironmentId::new("h2", "m2", "s3").unwrap(),
            target_env: EnvironmentId::new("h1", "m2", "s3").unwrap(),
        }
    }

    /// Inference-time scenario driven by CPU status and GPU frequency, carried
    /// to the target by the power shift `y^1.7`, with measurement noise of 1%
    /// of the mean response in both environments. CPU and memory frequency
    /// do not matter in either environment.
    pub fn power_shift(seed: u64) -> Scenario {
        let terms = vec![
            WeightedTerm::new(Term::Intercept, 60.0),
            WeightedTerm::new(Term::Main(0), -10.0),
            WeightedTerm::new(Term::Main(2), -30.0),
            WeightedTerm::new(Term::Quadratic(2), 12.0),
            WeightedTerm::new(Term::Interaction(0, 2), 4.0),
        ];
        // source spans 36..60 with mean ~45.1; target mean ~657
        Scenario {
            space: hardware_space_4096(),
            terms,
            noise_sd: 0.45,
            target_noise_sd: Some(6.6),
            shift: ShiftSpec::Power {
                a: 1.0,
                gamma: 1.7,
                b: 0.0,
            },
            seed,
            metric: Metric::InferenceTime,
            source_env: EnvironmentId::new("h2", "m2", "s3").unwrap(),
            target_env: EnvironmentId::new("h1", "m1", "s1").unwrap(),
        }
    }
}
