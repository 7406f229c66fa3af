//! Stepwise regression over polynomial terms: forward selection on R² gain,
//! backward elimination on coefficient significance, then pruning of
//! negligible coefficients.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::fit_matrix;
use super::TrainingSet;
use crate::error::{Error, Result};
use crate::terms::{Influence, Term};

/// Coefficients with magnitude strictly below this are dropped by [`LinearTermModel::prune_small_coefficients`].
pub const PRUNE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTermModel {
    pub input_dim: usize,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

impl LinearTermModel {
    pub fn new(input_dim: usize, terms: Vec<Term>, coefficients: Vec<f64>, r_squared: f64) -> Result<Self> {
        if terms.len() != coefficients.len() {
            return Err(Error::LengthMismatch(terms.len(), coefficients.len()));
        }
        for t in &terms {
            t.validate(input_dim)?;
        }
        Ok(LinearTermModel {
            input_dim,
            terms,
            coefficients,
            r_squared,
        })
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.value(x))
            .sum()
    }

    /// Drops terms whose coefficient magnitude is below [`PRUNE_THRESHOLD`].
    ///
    /// The intercept is structural and always kept.
    pub fn prune_small_coefficients(&self) -> LinearTermModel {
        let (terms, coefficients) = self
            .terms
            .iter()
            .zip(&self.coefficients)
            .filter(|(t, c)| **t == Term::Intercept || c.abs() >= PRUNE_THRESHOLD)
            .map(|(t, c)| (*t, *c))
            .unzip();
        LinearTermModel {
            input_dim: self.input_dim,
            terms,
            coefficients,
            r_squared: self.r_squared,
        }
    }

    /// Options and interaction pairs appearing in the surviving non-intercept terms.
    pub fn influential_terms(&self) -> Influence {
        Influence::from_terms(&self.terms)
    }

    pub fn coefficient(&self, term: Term) -> Option<f64> {
        self.terms.iter().position(|t| *t == term).map(|i| self.coefficients[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepwiseParams {
    /// Minimum R² gain for a forward step.
    pub fs_epsilon: f64,
    /// Terms whose coefficient p-value exceeds this are eliminated.
    pub be_alpha: f64,
}

impl Default for StepwiseParams {
    fn default() -> Self {
        StepwiseParams {
            fs_epsilon: 1e-3,
            be_alpha: 0.05,
        }
    }
}

impl StepwiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs_epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fs_epsilon must be positive, got {}",
                self.fs_epsilon
            )));
        }
        if !(self.be_alpha > 0.0 && self.be_alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "be_alpha must lie in (0, 1), got {}",
                self.be_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Add { term: Term, r_squared: f64 },
    Remove { term: Term, p_value: f64, r_squared: f64 },
}

#[derive(Debug, Clone)]
pub struct StepwiseFit {
    /// Pruned final model.
    pub model: LinearTermModel,
    /// Model before pruning.
    pub unpruned: LinearTermModel,
    pub steps: Vec<Step>,
}

struct Design<'a> {
    columns: Vec<Vec<f64>>,
    targets: &'a [f64],
}

impl Design<'_> {
    fn fit(&self, included: &[usize]) -> Result<super::ols::OlsFit> {
        let n = self.targets.len();
        let x = DMatrix::from_fn(n, included.len(), |i, j| self.columns[included[j]][i]);
        let y = DVector::from_column_slice(self.targets);
        fit_matrix(&x, &y)
    }
}

/// Runs forward selection with backward elimination over `candidates`.
///
/// The intercept, when present among the candidates, is included from the
/// start and never eliminated. A term removed by backward elimination is not
/// offered again, which guarantees termination.
pub fn stepwise_fit(train: &TrainingSet, candidates: &[Term], params: StepwiseParams) -> Result<StepwiseFit> {
    params.validate()?;
    let input_dim = train.dimension();
    for t in candidates {
        t.validate(input_dim)?;
    }
    let distinct: BTreeSet<Vec<u64>> = train
        .rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    if distinct.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "stepwise regression needs at least 2 distinct configurations, got {}",
            distinct.len()
        )));
    }

    let mut candidates: Vec<Term> = candidates.to_vec();
    candidates.sort();
    candidates.dedup();
    let design = Design {
        columns: candidates
            .iter()
            .map(|t| train.rows.iter().map(|x| t.value(x)).collect())
            .collect(),
        targets: &train.targets,
    };

    let intercept = candidates.iter().position(|t| *t == Term::Intercept);
    let mut included: Vec<usize> = intercept.into_iter().collect();
    let mut barred = vec![false; candidates.len()];
    let mut steps = Vec::new();
    let mut current_r2 = if included.is_empty() {
        0.0
    } else {
        design.fit(&included)?.r_squared
    };

    loop {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..candidates.len() {
            if barred[c] || included.contains(&c) {
                continue;
            }
            let mut trial = included.clone();
            trial.push(c);
            let r2 = design.fit(&trial)?.r_squared;
            if best.is_none_or(|(_, b)| r2 > b) {
                best = Some((c, r2));
            }
        }
        let Some((c, r2)) = best else { break };
        if r2 - current_r2 < params.fs_epsilon {
            break;
        }
        included.push(c);
        included.sort_unstable();
        barred[c] = true;
        current_r2 = r2;
        steps.push(Step::Add {
            term: candidates[c],
            r_squared: r2,
        });

        loop {
            let fit = design.fit(&included)?;
            let Some(p_values) = fit.p_values else { break };
            let worst = included
                .iter()
                .enumerate()
                .filter(|(_, &c)| Some(c) != intercept)
                .map(|(pos, &c)| (pos, c, p_values[pos]))
                .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
                    Some(a) if a.2 >= cur.2 => Some(a),
                    _ => Some(cur),
                });
            match worst {
                Some((pos, c, p)) if p > params.be_alpha => {
                    included.remove(pos);
                    current_r2 = if included.is_empty() {
                        0.0
                    } else {
                        design.fit(&included)?.r_squared
                    };
                    steps.push(Step::Remove {
                        term: candidates[c],
                        p_value: p,
                        r_squared: current_r2,
                    });
                }
                _ => break,
            }
        }
    }

    let (coefficients, r_squared) = if included.is_empty() {
        (vec![], 0.0)
    } else {
        let fit = design.fit(&included)?;
        (fit.coefficients, fit.r_squared)
    };
    let unpruned = LinearTermModel {
        input_dim,
        terms: included.iter().map(|&c| candidates[c]).collect(),
        coefficients,
        r_squared,
    };
    Ok(StepwiseFit {
        model: unpruned.prune_small_coefficients(),
        unpruned,
        steps,
    })
}
