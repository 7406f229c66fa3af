//! Transfer strategies.
//!
//! Each strategy takes a source model (and, for guided sampling, the source
//! measurements) plus a metered oracle over the target environment, and
//! returns a target model together with the number of distinct target
//! configurations it paid to evaluate.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{rng_from_seed, MeasurementDataset, Metric, Oracle};
use crate::error::{Error, Result};
use crate::learners::{
    fit_forest, fit_learner, fit_ols, stepwise_fit, LearnerKind, LearnerSettings, PerformanceModel, ShiftModel,
    StepwiseParams, TrainingSet,
};
use crate::space::{Configuration, ConfigurationSpace};
use crate::terms::{candidate_terms, Influence};

/// Default share of the space a budgeted strategy may evaluate.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.0244;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Direct model transfer.
    Dm,
    /// Linear model shift.
    Lms,
    /// Nonlinear (random forest) model shift.
    Nlms,
    /// Guided sampling.
    Gs,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Dm, Strategy::Lms, Strategy::Nlms, Strategy::Gs];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Dm => "dm",
            Strategy::Lms => "lms",
            Strategy::Nlms => "nlms",
            Strategy::Gs => "gs",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dm" => Ok(Strategy::Dm),
            "lms" => Ok(Strategy::Lms),
            "nlms" => Ok(Strategy::Nlms),
            "gs" => Ok(Strategy::Gs),
            other => Err(Error::UnknownName {
                kind: "strategy",
                name: other.to_string(),
            }),
        }
    }
}

/// Inputs shared by all strategies.
#[derive(Clone, Copy)]
pub struct TransferContext<'a> {
    pub source_model: &'a PerformanceModel,
    pub source_dataset: &'a MeasurementDataset,
    pub target_oracle: &'a Oracle,
    pub space: &'a ConfigurationSpace,
    pub metric: Metric,
    pub budget_fraction: f64,
    pub learner: LearnerKind,
    pub settings: &'a LearnerSettings,
    pub seed: u64,
}

impl TransferContext<'_> {
    fn validate(&self) -> Result<()> {
        if **self.source_dataset.space() != *self.space {
            return Err(Error::InvalidParameter(
                "source dataset and transfer context use different spaces".into(),
            ));
        }
        if self.source_model.input_dim() != self.space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dimension(),
                actual: self.source_model.input_dim(),
            });
        }
        self.space.budget(self.budget_fraction)?;
        Ok(())
    }

    pub fn budget(&self) -> Result<usize> {
        self.space.budget(self.budget_fraction)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = rng_from_seed(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Why a strategy fell back to its degenerate-case behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// All sampled source predictions were equal; the shift became the target sample mean.
    ConstantSourcePredictions,
    /// Stepwise screening found no influential option; sampling was uniform over the oracle pool.
    NoInfluentialOptions,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub strategy: Strategy,
    pub target_model: PerformanceModel,
    /// Distinct target configurations evaluated.
    pub cost: usize,
    /// Configurations evaluated in the target environment, in query order.
    pub samples: Vec<Configuration>,
    pub fallback: Option<Fallback>,
    /// Options and pairs found by stepwise screening (guided sampling only).
    pub influence: Option<Influence>,
}

pub fn run_strategy(
    strategy: Strategy,
    ctx: &TransferContext<'_>,
    stepwise: StepwiseParams,
) -> Result<TransferOutcome> {
    match strategy {
        Strategy::Dm => direct_model_transfer(ctx),
        Strategy::Lms => linear_model_shift(ctx),
        Strategy::Nlms => nonlinear_model_shift(ctx),
        Strategy::Gs => guided_sampling_transfer(ctx, stepwise),
    }
}

/// Reuses the source model as is. Evaluates nothing in the target.
pub fn direct_model_transfer(ctx: &TransferContext<'_>) -> Result<TransferOutcome> {
    ctx.validate()?;
    Ok(TransferOutcome {
        strategy: Strategy::Dm,
        target_model: ctx.source_model.clone(),
        cost: 0,
        samples: vec![],
        fallback: None,
        influence: None,
    })
}

fn sample_pool(pool: &[Configuration], n: usize, rng: &mut ChaCha8Rng) -> Vec<Configuration> {
    let n = n.min(pool.len());
    index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

fn query_all(ctx: &TransferContext<'_>, configs: &[Configuration]) -> Result<Vec<f64>> {
    configs.iter().map(|c| ctx.target_oracle.query(c, ctx.metric)).collect()
}

struct PairedSample {
    configs: Vec<Configuration>,
    source_predictions: Vec<f64>,
    target_values: Vec<f64>,
}

fn paired_sample(ctx: &TransferContext<'_>) -> Result<PairedSample> {
    ctx.validate()?;
    let budget = ctx.budget()?;
    if budget < 2 {
        return Err(Error::InvalidParameter(format!(
            "model shift needs a budget of at least 2, got {budget}"
        )));
    }
    let mut rng = ctx.rng(1);
    let configs = sample_pool(ctx.target_oracle.pool(ctx.metric), budget, &mut rng);
    if configs.len() < 2 {
        return Err(Error::SampleTooLarge {
            requested: 2,
            available: configs.len(),
        });
    }
    let source_predictions = configs
        .iter()
        .map(|c| ctx.source_model.predict(c, ctx.space))
        .collect::<Result<Vec<_>>>()?;
    let target_values = query_all(ctx, &configs)?;
    Ok(PairedSample {
        configs,
        source_predictions,
        target_values,
    })
}

fn constant_shift(sample: &PairedSample) -> Option<ShiftModel> {
    let first = sample.source_predictions[0];
    if sample.source_predictions.iter().all(|&p| p == first) {
        let mean = sample.target_values.iter().sum::<f64>() / sample.target_values.len() as f64;
        Some(ShiftModel::Linear {
            intercept: mean,
            slope: 0.0,
        })
    } else {
        None
    }
}

fn shifted_outcome(
    strategy: Strategy,
    ctx: &TransferContext<'_>,
    sample: PairedSample,
    shift: ShiftModel,
    fallback: Option<Fallback>,
    tally_before: usize,
) -> TransferOutcome {
    TransferOutcome {
        strategy,
        target_model: PerformanceModel::Shifted {
            base: Box::new(ctx.source_model.clone()),
            shift,
        },
        cost: ctx.target_oracle.tally() - tally_before,
        samples: sample.configs,
        fallback,
        influence: None,
    }
}

/// Fits `target = b0 + b1 * source_prediction` on a random paired sample.
pub fn linear_model_shift(ctx: &TransferContext<'_>) -> Result<TransferOutcome> {
    let before = ctx.target_oracle.tally();
    let sample = paired_sample(ctx)?;
    if let Some(shift) = constant_shift(&sample) {
        return Ok(shifted_outcome(
            Strategy::Lms,
            ctx,
            sample,
            shift,
            Some(Fallback::ConstantSourcePredictions),
            before,
        ));
    }
    let rows: Vec<Vec<f64>> = sample.source_predictions.iter().map(|&p| vec![1.0, p]).collect();
    let fit = fit_ols(&rows, &sample.target_values)?;
    let shift = ShiftModel::Linear {
        intercept: fit.coefficients[0],
        slope: fit.coefficients[1],
    };
    Ok(shifted_outcome(Strategy::Lms, ctx, sample, shift, None, before))
}

/// Fits a random forest from source prediction to target value on a random paired sample.
pub fn nonlinear_model_shift(ctx: &TransferContext<'_>) -> Result<TransferOutcome> {
    let before = ctx.target_oracle.tally();
    let sample = paired_sample(ctx)?;
    if let Some(shift) = constant_shift(&sample) {
        return Ok(shifted_outcome(
            Strategy::Nlms,
            ctx,
            sample,
            shift,
            Some(Fallback::ConstantSourcePredictions),
            before,
        ));
    }
    let train = TrainingSet::new(
        sample.source_predictions.iter().map(|&p| vec![p]).collect(),
        sample.target_values.clone(),
    )?;
    let forest = fit_forest(&train, ctx.settings.shift_forest, ctx.seed)?;
    Ok(shifted_outcome(
        Strategy::Nlms,
        ctx,
        sample,
        ShiftModel::Forest { forest },
        None,
        before,
    ))
}

/// Screens influential options on the source data with stepwise regression,
/// spends the target budget on them, and trains a fresh target model.
pub fn guided_sampling_transfer(ctx: &TransferContext<'_>, stepwise: StepwiseParams) -> Result<TransferOutcome> {
    ctx.validate()?;
    let before = ctx.target_oracle.tally();
    let budget = ctx.budget()?;
    let source = ctx.source_dataset.training_set(ctx.metric);
    let screening = stepwise_fit(&source, &candidate_terms(ctx.space.dimension()), stepwise)?;
    let influence = screening.model.influential_terms();

    let pool = ctx.target_oracle.pool(ctx.metric);
    let mut rng = ctx.rng(2);
    let (samples, fallback) = if influence.is_empty() {
        (
            sample_pool(pool, budget, &mut rng),
            Some(Fallback::NoInfluentialOptions),
        )
    } else {
        let available: HashSet<&Configuration> = pool.iter().collect();
        let samples = guided_sample(ctx.space, &influence.options, budget, &mut rng, |c| {
            available.contains(c)
        });
        (samples, None)
    };

    let values = query_all(ctx, &samples)?;
    let rows = samples
        .iter()
        .map(|c| ctx.space.encode(c))
        .collect::<Result<Vec<_>>>()?;
    let train = TrainingSet::new(rows, values)?;
    let target_model = fit_learner(ctx.learner, &train, ctx.settings, ctx.seed)?;
    Ok(TransferOutcome {
        strategy: Strategy::Gs,
        target_model,
        cost: ctx.target_oracle.tally() - before,
        samples,
        fallback,
        influence: Some(influence),
    })
}

/// Builds a sample that varies only the `influential` options inside each
/// block of fixed non-influential settings.
///
/// The first block pins every non-influential option at its median level and
/// covers the influential cross-product. If that block alone exceeds
/// `budget`, a uniform subsample of it is returned. Otherwise further blocks,
/// each with a random pinned setting, are appended (each block shuffled) until
/// the budget is spent or no setting is left. Only configurations accepted by
/// `available` are used.
pub fn guided_sample(
    space: &ConfigurationSpace,
    influential: &BTreeSet<usize>,
    budget: usize,
    rng: &mut ChaCha8Rng,
    available: impl Fn(&Configuration) -> bool,
) -> Vec<Configuration> {
    let d = space.dimension();
    let counts = space.level_counts();
    let infl: Vec<usize> = influential.iter().copied().filter(|&i| i < d).collect();
    let pinned_opts: Vec<usize> = (0..d).filter(|i| !influential.contains(i)).collect();
    let infl_space = ConfigurationSpace::from_level_counts(&infl.iter().map(|&i| counts[i]).collect::<Vec<_>>());
    let pinned_space =
        ConfigurationSpace::from_level_counts(&pinned_opts.iter().map(|&i| counts[i]).collect::<Vec<_>>());

    let block = |pinned: &[usize]| -> Vec<Configuration> {
        let Ok(infl_space) = &infl_space else {
            return vec![];
        };
        infl_space
            .enumerate()
            .map(|inner| {
                let mut levels = vec![0; d];
                for (&opt, &lvl) in infl.iter().zip(inner.level_indices()) {
                    levels[opt] = lvl;
                }
                for (&opt, &lvl) in pinned_opts.iter().zip(pinned) {
                    levels[opt] = lvl;
                }
                Configuration::new(levels)
            })
            .filter(|c| available(c))
            .collect()
    };

    let medians: Vec<usize> = pinned_opts.iter().map(|&i| space.options()[i].median_index()).collect();
    let first = block(&medians);
    if first.len() >= budget {
        let mut picked: Vec<Configuration> = index::sample(rng, first.len(), budget)
            .into_iter()
            .map(|i| first[i].clone())
            .collect();
        picked.sort();
        return picked;
    }

    let mut chosen = first;
    let Ok(pinned_space) = pinned_space else {
        return chosen;
    };
    let median_index = pinned_space.index_of(&Configuration::new(medians));
    let settings = pinned_space.cardinality();
    let order = index::sample(rng, settings, settings);
    for k in order.into_iter().filter(|&k| k != median_index) {
        if chosen.len() >= budget {
            break;
        }
        let setting = pinned_space.config_at(k);
        let mut extra = block(setting.level_indices());
        extra.shuffle(rng);
        let room = budget - chosen.len();
        chosen.extend(extra.into_iter().take(room));
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(_: &Configuration) -> bool {
        true
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("xx".parse::<Strategy>().is_err());
    }

    #[test]
    fn guided_sample_covers_influential_levels_at_median() {
        // option 1 has 4 levels, others 3 each
        let space = ConfigurationSpace::from_level_counts(&[3, 4, 3]).unwrap();
        let infl: BTreeSet<usize> = [1].into();
        let mut rng = rng_from_seed(0);
        let s = guided_sample(&space, &infl, 8, &mut rng, all);
        assert!(s.len() <= 8);
        let at_median: Vec<_> = s
            .iter()
            .filter(|c| c.level_indices()[0] == 1 && c.level_indices()[2] == 1)
            .collect();
        let levels: BTreeSet<usize> = at_median.iter().map(|c| c.level_indices()[1]).collect();
        assert_eq!(levels, [0, 1, 2, 3].into());
        assert_eq!(&s[..4], &at_median.into_iter().cloned().collect::<Vec<_>>()[..]);
    }

    #[test]
    fn guided_sample_subsamples_large_block() {
        let space = ConfigurationSpace::from_level_counts(&[5, 6, 7]).unwrap();
        let infl: BTreeSet<usize> = [0, 1].into();
        let mut rng = rng_from_seed(4);
        let s = guided_sample(&space, &infl, 10, &mut rng, all);
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|c| c.level_indices()[2] == 3));
        let distinct: HashSet<_> = s.iter().collect();
        assert_eq!(distinct.len(), 10);
    }

    #[test]
    fn guided_sample_fills_with_whole_blocks() {
        let space = ConfigurationSpace::from_level_counts(&[2, 3, 4]).unwrap();
        let infl: BTreeSet<usize> = [2].into();
        let mut rng = rng_from_seed(1);
        let s = guided_sample(&space, &infl, 14, &mut rng, all);
        assert_eq!(s.len(), 14);
        let distinct: HashSet<_> = s.iter().collect();
        assert_eq!(distinct.len(), 14);
        // blocks of 4 share their pinned setting; the last one may be partial
        for chunk in s.chunks(4) {
            let pin = &chunk[0].level_indices()[..2];
            assert!(chunk.iter().all(|c| &c.level_indices()[..2] == pin));
        }
        assert_eq!(&s[0].level_indices()[..2], &[0, 1]);
    }

    #[test]
    fn guided_sample_respects_availability_and_exhaustion() {
        let space = ConfigurationSpace::from_level_counts(&[2, 3]).unwrap();
        let infl: BTreeSet<usize> = [1].into();
        let mut rng = rng_from_seed(1);
        let banned = Configuration::new(vec![0, 2]);
        let s = guided_sample(&space, &infl, 100, &mut rng, |c| *c != banned);
        assert_eq!(s.len(), 5);
        assert!(!s.contains(&banned));
    }

    #[test]
    fn guided_sample_all_influential() {
        let space = ConfigurationSpace::from_level_counts(&[3, 3]).unwrap();
        let infl: BTreeSet<usize> = [0, 1].into();
        let mut rng = rng_from_seed(1);
        let s = guided_sample(&space, &infl, 4, &mut rng, all);
        assert_eq!(s.len(), 4);
        let s = guided_sample(&space, &infl, 20, &mut rng, all);
        assert_eq!(s.len(), 9);
    }
}
