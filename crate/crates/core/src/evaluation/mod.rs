//! Error metric, the experiment matrix runner, strategy comparison and
//! report emission.

mod report;

pub use report::{
    emit_report, parse_report_csv, plot_data, plot_file_name, render_table, write_report_csv, ReportFiles, CSV_COLUMNS,
    CSV_FILE, TABLE_FILE,
};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::dataset::{EnvironmentId, MeasurementDataset, Metric, Oracle};
use crate::error::{Error, Result};
use crate::learners::{fit_learner, LearnerKind, LearnerSettings, PerformanceModel, StepwiseParams};
use crate::space::{Configuration, ConfigurationSpace};
use crate::transfer::{run_strategy, Strategy, TransferContext, DEFAULT_BUDGET_FRACTION};

/// Smallest admissible |truth|.
pub const TRUTH_GUARD: f64 = 1e-9;

/// Absolute percentage error of each prediction.
pub fn percentage_errors(truth: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            if !(t.abs() >= TRUTH_GUARD) {
                Err(Error::NearZeroTruth(t))
            } else {
                Ok(100.0 * (t - p).abs() / t.abs())
            }
        })
        .collect()
}

/// Mean absolute percentage error, in percent.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    let errs = percentage_errors(truth, pred)?;
    Ok(mean(&errs))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Error of one model on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrFragment {
    pub err_percent: f64,
    pub err_dispersion: f64,
    pub point_errors: Vec<f64>,
}

pub fn evaluate_model(
    model: &PerformanceModel,
    space: &ConfigurationSpace,
    test: &[(Configuration, f64)],
) -> Result<ErrFragment> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let truth: Vec<f64> = test.iter().map(|(_, v)| *v).collect();
    let pred = test
        .iter()
        .map(|(c, _)| model.predict(c, space))
        .collect::<Result<Vec<_>>>()?;
    let point_errors = percentage_errors(&truth, &pred)?;
    Ok(ErrFragment {
        err_percent: mean(&point_errors),
        err_dispersion: sample_sd(&point_errors),
        point_errors,
    })
}

/// One aggregated cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrReport {
    pub source_env: EnvironmentId,
    pub target_env: EnvironmentId,
    pub strategy: Strategy,
    pub learner: LearnerKind,
    pub metric: Metric,
    /// Mean absolute percentage error over every held-out point of every seed.
    pub err_percent: f64,
    /// Sample standard deviation of those per-point errors.
    pub err_dispersion: f64,
    /// Largest per-seed evaluation cost.
    pub cost: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub learner: LearnerKind,
    pub metric: Metric,
    pub baseline: Strategy,
    pub improved: Strategy,
    /// Mean Err of the baseline over targets.
    pub baseline_err: f64,
    /// Mean Err of the improved strategy over targets.
    pub improved_err: f64,
    pub relative_reduction_percent: f64,
}

/// `(baseline - improved) / baseline * 100`. Negative when `improved` is worse.
pub fn relative_reduction(baseline_err: f64, improved_err: f64) -> f64 {
    (baseline_err - improved_err) / baseline_err * 100.0
}

/// Relative reduction of mean Err from `baseline` to `improved`, per (learner, metric).
///
/// Err is first averaged over the targets of each group; every target that
/// has one of the two strategies must have both.
pub fn compare(reports: &[ErrReport], baseline: Strategy, improved: Strategy) -> Result<Vec<ComparisonRow>> {
    type Cell = (Option<f64>, Option<f64>);
    let mut groups: BTreeMap<(LearnerKind, Metric), BTreeMap<&EnvironmentId, Cell>> = BTreeMap::new();
    for r in reports {
        let slot = if r.strategy == baseline {
            0
        } else if r.strategy == improved {
            1
        } else {
            continue;
        };
        let cell = groups
            .entry((r.learner, r.metric))
            .or_default()
            .entry(&r.target_env)
            .or_default();
        if slot == 0 {
            cell.0 = Some(r.err_percent);
        } else {
            cell.1 = Some(r.err_percent);
        }
    }
    let mut rows = Vec::new();
    for ((learner, metric), targets) in groups {
        let mut b = Vec::new();
        let mut i = Vec::new();
        for (target, cell) in targets {
            match cell {
                (Some(x), Some(y)) => {
                    b.push(x);
                    i.push(y);
                }
                (None, _) => {
                    return Err(Error::MissingCell(format!("{target} {baseline} {learner} {metric}")));
                }
                (_, None) => {
                    return Err(Error::MissingCell(format!("{target} {improved} {learner} {metric}")));
                }
            }
        }
        let (baseline_err, improved_err) = (mean(&b), mean(&i));
        rows.push(ComparisonRow {
            learner,
            metric,
            baseline,
            improved,
            baseline_err,
            improved_err,
            relative_reduction_percent: relative_reduction(baseline_err, improved_err),
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingCell(format!("no cells for {baseline} and {improved}")));
    }
    Ok(rows)
}

/// A source dataset, target datasets, and the strategy x learner x seed matrix to run over them.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub source: MeasurementDataset,
    pub targets: Vec<MeasurementDataset>,
    pub strategies: Vec<Strategy>,
    pub learners: Vec<LearnerKind>,
    pub metric: Metric,
    pub budget_fraction: f64,
    pub stepwise: StepwiseParams,
    pub settings: LearnerSettings,
    pub seeds: Vec<u64>,
    pub test_count: usize,
    /// Upper bound on concurrent jobs; 0 means one per available core.
    pub workers: usize,
}

impl Experiment {
    /// Defaults: every strategy, both learners, seed 0, 10 held-out configurations.
    pub fn new(source: MeasurementDataset, targets: Vec<MeasurementDataset>, metric: Metric) -> Self {
        Experiment {
            source,
            targets,
            strategies: Strategy::ALL.to_vec(),
            learners: vec![LearnerKind::Rt, LearnerKind::Nn],
            metric,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            stepwise: StepwiseParams::default(),
            settings: LearnerSettings::default(),
            seeds: vec![0],
            test_count: 10,
            workers: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.targets.is_empty() || self.strategies.is_empty() || self.learners.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "experiment needs at least one target, strategy, learner and seed".into(),
            ));
        }
        let space = self.source.space();
        self.stepwise.validate()?;
        space.budget(self.budget_fraction)?;
        for ds in std::iter::once(&self.source).chain(&self.targets) {
            if **ds.space() != **space {
                return Err(Error::InvalidParameter(format!(
                    "dataset for {} uses a different configuration space",
                    ds.env()
                )));
            }
            if !ds.metrics().contains(&self.metric) {
                return Err(Error::DegenerateDataset(format!(
                    "dataset for {} has no {} measurements",
                    ds.env(),
                    self.metric
                )));
            }
        }
        for t in &self.targets {
            let distinct = t.mean_table(self.metric).len();
            if self.test_count == 0 || self.test_count >= distinct {
                return Err(Error::InvalidTestCount {
                    test_count: self.test_count,
                    distinct,
                });
            }
        }
        let mut seen = HashSet::new();
        for t in &self.targets {
            if !seen.insert(t.env()) {
                return Err(Error::InvalidParameter(format!("target {} listed twice", t.env())));
            }
        }
        Ok(())
    }

    fn worker_count(&self, jobs: usize) -> usize {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let w = if self.workers == 0 { available } else { self.workers };
        w.clamp(1, jobs.max(1))
    }
}

/// Result of one (target, strategy, learner, seed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub target: usize,
    pub strategy: Strategy,
    pub learner: LearnerKind,
    pub seed: u64,
    pub cost: usize,
    pub fragment: ErrFragment,
}

/// Runs `jobs` on up to `workers` threads; results keep job order.
fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()).max(1) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = f(&items[k]);
                *slots[k].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every job ran"))
        .collect()
}

/// Every individual run of the matrix, ordered by (target, strategy, learner, seed).
pub fn run_matrix(exp: &Experiment) -> Result<Vec<RunResult>> {
    exp.validate()?;
    let space = exp.source.space().as_ref();

    let learners: Vec<LearnerKind> = exp
        .learners
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let strategies: Vec<Strategy> = exp
        .strategies
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let seeds: Vec<u64> = exp.seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    let source_train = exp.source.training_set(exp.metric);
    let source_jobs: Vec<(LearnerKind, u64)> = learners
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let source_models = par_map(&source_jobs, exp.worker_count(source_jobs.len()), |&(l, s)| {
        fit_learner(l, &source_train, &exp.settings, s)
    })?;
    let source_model = |l: LearnerKind, s: u64| -> &PerformanceModel {
        let k = source_jobs
            .iter()
            .position(|&j| j == (l, s))
            .expect("source model trained");
        &source_models[k]
    };

    let mut jobs = Vec::new();
    for t in 0..exp.targets.len() {
        for &strategy in &strategies {
            for &learner in &learners {
                for &seed in &seeds {
                    jobs.push((t, strategy, learner, seed));
                }
            }
        }
    }
    par_map(&jobs, exp.worker_count(jobs.len()), |&(t, strategy, learner, seed)| {
        let (pool, test) = exp.targets[t].split(exp.test_count, seed)?;
        let oracle = Oracle::new(&pool)?;
        let ctx = TransferContext {
            source_model: source_model(learner, seed),
            source_dataset: &exp.source,
            target_oracle: &oracle,
            space,
            metric: exp.metric,
            budget_fraction: exp.budget_fraction,
            learner,
            settings: &exp.settings,
            seed,
        };
        let outcome = run_strategy(strategy, &ctx, exp.stepwise)?;
        let test_table = test.mean_table(exp.metric);
        assert_eq!(
            oracle.tally_of(test_table.iter().map(|(c, _)| c)),
            0,
            "held-out configurations were queried"
        );
        let fragment = evaluate_model(&outcome.target_model, space, &test_table)?;
        Ok(RunResult {
            target: t,
            strategy,
            learner,
            seed,
            cost: outcome.cost,
            fragment,
        })
    })
}

/// Runs the matrix and aggregates each (target, strategy, learner) cell over seeds.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<ErrReport>> {
    let runs = run_matrix(exp)?;
    Ok(aggregate(exp, &runs))
}

fn aggregate(exp: &Experiment, runs: &[RunResult]) -> Vec<ErrReport> {
    let mut cells: BTreeMap<(usize, Strategy, LearnerKind), Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        cells.entry((r.target, r.strategy, r.learner)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((t, strategy, learner), rs)| {
            let errors: Vec<f64> = rs
                .iter()
                .flat_map(|r| r.fragment.point_errors.iter().copied())
                .collect();
            ErrReport {
                source_env: exp.source.env().clone(),
                target_env: exp.targets[t].env().clone(),
                strategy,
                learner,
                metric: exp.metric,
                err_percent: mean(&errors),
                err_dispersion: sample_sd(&errors),
                cost: rs.iter().map(|r| r.cost).max().unwrap_or(0),
                seeds: rs.iter().map(|r| r.seed).collect(),
            }
        })
        .collect()
}
