//! Browser demo: a response-surface heatmap, a strategy comparison on the
//! power-shift scenario, and stepwise screening of the source data.
//!
//! The exported functions take plain numbers and return JSON strings. The
//! `*_report` functions hold the logic so it can be tested natively.

use std::sync::Arc;

use perfxfer::evaluation::mape;
use perfxfer::learners::{fit_learner, stepwise_fit, LearnerSettings, StepwiseParams};
use perfxfer::synthetic::{presets, Scenario, SyntheticPair};
use perfxfer::terms::candidate_terms;
use perfxfer::transfer::{run_strategy, Strategy, TransferContext};
use perfxfer::{Configuration, LearnerKind, Metric, Oracle};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub x_option: String,
    pub y_option: String,
    pub x_levels: Vec<f64>,
    pub y_levels: Vec<f64>,
    /// `values[row][col]` with rows over the y option.
    pub source: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub err_percent: f64,
    pub cost: usize,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub learner: String,
    pub budget: usize,
    pub rows: Vec<StrategyRow>,
}

#[derive(Debug, Serialize)]
pub struct ScreenedTerm {
    pub term: String,
    pub coefficient: f64,
}

#[derive(Debug, Serialize)]
pub struct Screening {
    pub terms: Vec<ScreenedTerm>,
    pub r_squared: f64,
    pub influential: Vec<String>,
}

fn scenario(name: &str, seed: u64) -> Result<Scenario, String> {
    match name {
        "power_shift" => Ok(presets::power_shift(seed)),
        "wide_range_energy" => Ok(presets::wide_range_energy(seed)),
        other => Err(format!("unknown scenario `{other}`")),
    }
}

fn generate(name: &str, seed: u64) -> Result<SyntheticPair, String> {
    scenario(name, seed)?.generate().map_err(|e| e.to_string())
}

/// Noiseless source and target responses over two options, the others held at their median level.
pub fn heatmap_report(name: &str, x: usize, y: usize) -> Result<Heatmap, String> {
    let pair = generate(name, 0)?;
    let space = Arc::clone(pair.source.space());
    let d = space.dimension();
    if x >= d || y >= d || x == y {
        return Err(format!("need two distinct options below {d}"));
    }
    let opts = space.options();
    let base: Vec<usize> = opts.iter().map(|o| o.median_index()).collect();
    let mut source = Vec::new();
    let mut target = Vec::new();
    for yl in 0..opts[y].level_count() {
        let mut srow = Vec::new();
        let mut trow = Vec::new();
        for xl in 0..opts[x].level_count() {
            let mut idx = base.clone();
            idx[x] = xl;
            idx[y] = yl;
            let c = Configuration::new(idx);
            srow.push(pair.source_truth(&c));
            trow.push(pair.target_truth(&c));
        }
        source.push(srow);
        target.push(trow);
    }
    Ok(Heatmap {
        x_option: opts[x].name.clone(),
        y_option: opts[y].name.clone(),
        x_levels: opts[x].levels.clone(),
        y_levels: opts[y].levels.clone(),
        source,
        target,
    })
}

/// Runs every strategy once and scores it against the noiseless target over the whole space.
pub fn comparison_report(
    seed: u64,
    learner: &str,
    budget_fraction: f64,
    nn_epochs: usize,
) -> Result<Comparison, String> {
    let learner: LearnerKind = learner.parse().map_err(|e: perfxfer::Error| e.to_string())?;
    let pair = generate("power_shift", seed)?;
    let space = Arc::clone(pair.source.space());
    let metric = Metric::InferenceTime;
    let mut settings = LearnerSettings::default();
    settings.nn.epochs = nn_epochs;
    let source_model =
        fit_learner(learner, &pair.source.training_set(metric), &settings, seed).map_err(|e| e.to_string())?;
    let truth: Vec<f64> = space.enumerate().map(|c| pair.target_truth(&c)).collect();
    let mut rows = Vec::new();
    let mut budget = 0;
    for strategy in Strategy::ALL {
        let oracle = Oracle::new(&pair.target).map_err(|e| e.to_string())?;
        let ctx = TransferContext {
            source_model: &source_model,
            source_dataset: &pair.source,
            target_oracle: &oracle,
            space: &space,
            metric,
            budget_fraction,
            learner,
            settings: &settings,
            seed,
        };
        budget = ctx.budget().map_err(|e| e.to_string())?;
        let out = run_strategy(strategy, &ctx, StepwiseParams::default()).map_err(|e| e.to_string())?;
        let pred: Vec<f64> = space
            .enumerate()
            .map(|c| out.target_model.predict(&c, &space).unwrap_or(f64::NAN))
            .collect();
        rows.push(StrategyRow {
            strategy: strategy.to_string(),
            err_percent: mape(&truth, &pred).map_err(|e| e.to_string())?,
            cost: out.cost,
        });
    }
    Ok(Comparison {
        learner: learner.to_string(),
        budget,
        rows,
    })
}

/// Stepwise regression on the source data of a scenario.
pub fn screening_report(name: &str, fs_epsilon: f64, be_alpha: f64) -> Result<Screening, String> {
    let pair = generate(name, 0)?;
    let space = pair.source.space();
    let metric = pair.source.metrics()[0];
    let fit = stepwise_fit(
        &pair.source.training_set(metric),
        &candidate_terms(space.dimension()),
        StepwiseParams { fs_epsilon, be_alpha },
    )
    .map_err(|e| e.to_string())?;
    let terms = fit
        .model
        .terms
        .iter()
        .zip(&fit.model.coefficients)
        .map(|(t, c)| ScreenedTerm {
            term: t.to_string(),
            coefficient: *c,
        })
        .collect();
    let influential = fit
        .model
        .influential_terms()
        .options
        .iter()
        .map(|&i| space.options()[i].name.clone())
        .collect();
    Ok(Screening {
        terms,
        r_squared: fit.model.r_squared,
        influential,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn heatmap(scenario: &str, x: usize, y: usize) -> Result<String, JsValue> {
    to_js(heatmap_report(scenario, x, y))
}

#[wasm_bindgen]
pub fn compare_strategies(seed: u32, learner: &str, budget_fraction: f64, nn_epochs: u32) -> Result<String, JsValue> {
    to_js(comparison_report(
        seed as u64,
        learner,
        budget_fraction,
        nn_epochs as usize,
    ))
}

#[wasm_bindgen]
pub fn screen(scenario: &str, fs_epsilon: f64, be_alpha: f64) -> Result<String, JsValue> {
    to_js(screening_report(scenario, fs_epsilon, be_alpha))
}
