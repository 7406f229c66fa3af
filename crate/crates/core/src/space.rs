//! Discrete configuration spaces.
//!
//! A space is an ordered list of options, each with a finite, strictly
//! increasing list of numeric levels. A [`Configuration`] picks one level
//! index per option. Declaration order is significant: it fixes the order
//! of feature-vector components and the lexicographic enumeration order.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single tunable option with ordered numeric levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub levels: Vec<f64>,
}

impl OptionSpec {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, levels: Vec<f64>) -> Self {
        OptionSpec {
            name: name.into(),
            unit: unit.into(),
            levels,
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Index of the level exactly equal to `value`, if any.
    pub fn level_index(&self, value: f64) -> Option<usize> {
        self.levels.iter().position(|&l| l == value)
    }

    /// Median level index (lower median for even counts).
    pub fn median_index(&self) -> usize {
        (self.levels.len() - 1) / 2
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::InvalidSpace("option with empty name".into()));
        }
        if self.name.contains(',') || self.name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSpace(format!(
                "option name `{}` must not contain commas or whitespace",
                self.name
            )));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidSpace(format!("option `{}` has no levels", self.name)));
        }
        if self.levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "option `{}` has a non-finite level",
                self.name
            )));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpace(format!(
                "levels of option `{}` must be strictly increasing",
                self.name
            )));
        }
        Ok(())
    }
}

/// A point in a configuration space: one level index per option.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn new(level_indices: Vec<usize>) -> Self {
        Configuration(level_indices)
    }

    pub fn level_indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{idx}")?;
        }
        f.write_str(")")
    }
}

impl From<Vec<usize>> for Configuration {
    fn from(v: Vec<usize>) -> Self {
        Configuration(v)
    }
}

#[derive(Deserialize, Serialize)]
struct SpaceFile {
    options: Vec<OptionSpec>,
}

/// The Cartesian product of the declared options' levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceFile", into = "SpaceFile")]
pub struct ConfigurationSpace {
    options: Vec<OptionSpec>,
}

impl TryFrom<SpaceFile> for ConfigurationSpace {
    type Error = Error;

    fn try_from(file: SpaceFile) -> Result<Self> {
        ConfigurationSpace::new(file.options)
    }
}

impl From<ConfigurationSpace> for SpaceFile {
    fn from(space: ConfigurationSpace) -> Self {
        SpaceFile { options: space.options }
    }
}

impl ConfigurationSpace {
    pub fn new(options: Vec<OptionSpec>) -> Result<Self> {
        if options.is_empty() {
            return Err(Error::InvalidSpace("at least one option required".into()));
        }
        let mut names = HashSet::new();
        for opt in &options {
            opt.validate()?;
            if !names.insert(opt.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate option name `{}`", opt.name)));
            }
        }
        let space = ConfigurationSpace { options };
        space
            .level_counts()
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidSpace("cardinality overflows usize".into()))?;
        Ok(space)
    }

    /// Builds a space with levels `0, 1, ..., n-1` for each count, named `x0, x1, ...`.
    pub fn from_level_counts(counts: &[usize]) -> Result<Self> {
        let options = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| OptionSpec::new(format!("x{i}"), "", (0..n).map(|l| l as f64).collect()))
            .collect();
        ConfigurationSpace::new(options)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("space serializes to toml")
    }

    pub fn options(&self) -> &[OptionSpec] {
        &self.options
    }

    pub fn dimension(&self) -> usize {
        self.options.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.options.iter().map(OptionSpec::level_count).collect()
    }

    pub fn cardinality(&self) -> usize {
        self.options.iter().map(OptionSpec::level_count).product()
    }

    pub fn option_index(&self, name: &str) -> Option<usize> {
        self.options.iter().position(|o| o.name == name)
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: config.len(),
            });
        }
        for (opt, &idx) in self.options.iter().zip(config.level_indices()) {
            if idx >= opt.level_count() {
                return Err(Error::LevelOutOfRange {
                    option: opt.name.clone(),
                    index: idx,
                    levels: opt.level_count(),
                });
            }
        }
        Ok(())
    }

    /// All configurations in lexicographic order of level indices.
    pub fn enumerate(&self) -> Enumerate {
        Enumerate {
            counts: self.level_counts(),
            next: Some(vec![0; self.dimension()]),
        }
    }

    /// Position of `config` in [`enumerate`](Self::enumerate) order.
    pub fn index_of(&self, config: &Configuration) -> usize {
        config
            .level_indices()
            .iter()
            .zip(&self.options)
            .fold(0, |acc, (&idx, opt)| acc * opt.level_count() + idx)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn config_at(&self, mut index: usize) -> Configuration {
        let mut levels = vec![0; self.dimension()];
        for (slot, opt) in levels.iter_mut().zip(&self.options).rev() {
            let n = opt.level_count();
            *slot = index % n;
            index /= n;
        }
        Configuration(levels)
    }

    /// Min-max encoding of each level index into `[0, 1]`.
    ///
    /// Single-level options encode to `0`.
    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.validate(config)?;
        Ok(self.encode_unchecked(config))
    }

    pub(crate) fn encode_unchecked(&self, config: &Configuration) -> Vec<f64> {
        config
            .level_indices()
            .iter()
            .zip(&self.options)
            .map(|(&idx, opt)| {
                let n = opt.level_count();
                if n <= 1 {
                    0.0
                } else {
                    idx as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    /// Raw level values of a configuration.
    pub fn values(&self, config: &Configuration) -> Vec<f64> {
        config
            .level_indices()
            .iter()
            .zip(&self.options)
            .map(|(&idx, opt)| opt.levels[idx])
            .collect()
    }

    /// Number of samples a fraction of the space buys: `ceil(fraction * cardinality)`, at least 1.
    pub fn budget(&self, fraction: f64) -> Result<usize> {
        budget_for(self.cardinality(), fraction)
    }
}

/// Budget arithmetic on a bare cardinality.
pub fn budget_for(cardinality: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    let raw = (fraction * cardinality as f64).ceil() as usize;
    Ok(raw.clamp(1, cardinality.max(1)))
}

/// Lexicographic iterator over a space; the last option varies fastest.
pub struct Enumerate {
    counts: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Enumerate {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut advanced = false;
        for pos in (0..succ.len()).rev() {
            succ[pos] += 1;
            if succ[pos] < self.counts[pos] {
                advanced = true;
                break;
            }
            succ[pos] = 0;
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(Configuration(current))
    }
}
