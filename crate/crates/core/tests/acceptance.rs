//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use perfxfer::dataset::{MeasurementRecord, Oracle};
use perfxfer::evaluation::{emit_report, mape, run_experiment, Experiment};
use perfxfer::learners::{
    fit_forest, fit_learner, fit_tree, stepwise_fit, ForestParams, LearnerSettings, LinearTermModel, NeuralNetModel,
    PerformanceModel, ShiftModel, StepwiseParams, TrainingSet, TreeParams,
};
use perfxfer::space::budget_for;
use perfxfer::synthetic::{presets, Scenario, ShiftSpec, SyntheticPair, WeightedTerm};
use perfxfer::terms::candidate_terms;
use perfxfer::transfer::{run_strategy, Strategy, TransferContext, DEFAULT_BUDGET_FRACTION};
use perfxfer::{ConfigurationSpace, EnvironmentId, LearnerKind, MeasurementDataset, Metric, Term};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Term value computed from its definition, independent of the library.
fn term_value(t: Term, x: &[f64]) -> f64 {
    match t {
        Term::Intercept => 1.0,
        Term::Main(i) => x[i],
        Term::Quadratic(i) => x[i].powi(2),
        Term::Interaction(i, j) => x[i] * x[j],
    }
}

/// Min-max encoding from level indices, independent of the library.
fn encode(levels: &[usize], counts: &[usize]) -> Vec<f64> {
    levels
        .iter()
        .zip(counts)
        .map(|(&l, &n)| if n == 1 { 0.0 } else { l as f64 / (n - 1) as f64 })
        .collect()
}

fn grid(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in counts {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

fn criterion_1() -> Outcome {
    let counts = [4, 4, 4];
    let rows: Vec<Vec<f64>> = grid(&counts).iter().map(|l| encode(l, &counts)).collect();
    let pool: Vec<Term> = candidate_terms(3)
        .into_iter()
        .filter(|t| *t != Term::Intercept)
        .collect();
    let mut worst = 0.0f64;
    for draw in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + draw);
        let chosen: Vec<Term> = index::sample(&mut rng, pool.len(), 3)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        let mut truth: Vec<(Term, f64)> = chosen
            .iter()
            .map(|&t| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (t, sign * rng.random_range(1.0..5.0))
            })
            .collect();
        truth.push((Term::Intercept, rng.random_range(5.0..10.0)));
        let targets: Vec<f64> = rows
            .iter()
            .map(|x| truth.iter().map(|(t, c)| c * term_value(*t, x)).sum())
            .collect();
        let train = TrainingSet::new(rows.clone(), targets).map_err(|e| e.to_string())?;
        let fit = stepwise_fit(&train, &candidate_terms(3), StepwiseParams::default()).map_err(|e| e.to_string())?;
        let selected: BTreeSet<Term> = fit
            .model
            .terms
            .iter()
            .copied()
            .filter(|t| *t != Term::Intercept)
            .collect();
        let expected: BTreeSet<Term> = chosen.iter().copied().collect();
        ensure(selected == expected, || {
            format!("draw {draw}: selected {selected:?}, true {expected:?}")
        })?;
        for (t, c) in &truth {
            let got = fit
                .model
                .coefficient(*t)
                .ok_or_else(|| format!("draw {draw}: {t} missing"))?;
            worst = worst.max((got - c).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max coefficient error {worst:e} > 1e-6"))?;
    Ok(format!(
        "10/10 draws recovered exactly, max coefficient error {worst:.1e} (tol 1e-6)"
    ))
}

fn criterion_2() -> Outcome {
    let model = LinearTermModel::new(
        2,
        vec![Term::Intercept, Term::Main(0), Term::Main(1)],
        vec![4.0, 1e-13, 1e-12],
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let pruned = model.prune_small_coefficients();
    ensure(pruned.coefficient(Term::Main(0)).is_none(), || "1e-13 term kept".into())?;
    ensure(pruned.coefficient(Term::Main(1)) == Some(1e-12), || {
        "1e-12 term removed".into()
    })?;
    ensure(pruned.coefficient(Term::Intercept) == Some(4.0), || {
        "intercept removed".into()
    })?;
    Ok("1e-13 removed, 1e-12 retained".into())
}

fn criterion_3() -> Outcome {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[3.0, 7.0, 11.0], &[3.0, 7.0, 11.0], 0.0),
        (&[100.0, 200.0], &[110.0, 180.0], 10.0),
        (&[50.0], &[75.0], 50.0),
    ];
    for (t, p, want) in cases {
        let got = mape(t, p).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 1e-12, || {
            format!("mape({t:?}, {p:?}) = {got}, want {want}")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1000.0)).collect();
        let p: Vec<f64> = t.iter().map(|v| v * rng.random_range(0.2..1.8)).collect();
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let ct: Vec<f64> = t.iter().map(|v| c * v).collect();
        let cp: Vec<f64> = p.iter().map(|v| c * v).collect();
        let a = mape(&t, &p).map_err(|e| e.to_string())?;
        let b = mape(&ct, &cp).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / a.max(1.0));
    }
    ensure(worst <= 1e-12, || {
        format!("scale invariance relative deviation {worst:e} > 1e-12")
    })?;
    Ok(format!(
        "examples within 1e-12; 1000 scaled vectors, max relative deviation {worst:.1e}"
    ))
}

fn identical_costs(reports: &[perfxfer::evaluation::ErrReport], budget: usize) -> Result<(), String> {
    for r in reports {
        match r.strategy {
            Strategy::Dm => ensure(r.cost == 0, || format!("dm cost {} != 0", r.cost))?,
            _ => ensure(r.cost >= 1 && r.cost <= budget, || {
                format!("{} {} cost {} outside [1, {budget}]", r.strategy, r.learner, r.cost)
            })?,
        }
    }
    Ok(())
}

fn bench_4096() -> Experiment {
    let pair = presets::power_shift(0).generate().expect("preset generates");
    let mut exp = Experiment::new(pair.source, vec![pair.target], Metric::InferenceTime);
    exp.seeds = vec![0, 1];
    exp
}

fn criterion_4(reports_dir: &std::path::Path) -> Outcome {
    // 4 * 12 * 20 * 48 = 46,080
    let want = (46_080u64 * 244).div_ceil(10_000) as usize;
    let got = budget_for(46_080, DEFAULT_BUDGET_FRACTION).map_err(|e| e.to_string())?;
    ensure(got == want && got == 1125, || {
        format!("budget(46080) = {got}, want 1125")
    })?;

    let space = ConfigurationSpace::from_level_counts(&[4, 12, 20, 48]).map_err(|e| e.to_string())?;
    ensure(space.cardinality() == 46_080, || "cardinality".into())?;
    let scenario = Scenario {
        space,
        terms: vec![
            WeightedTerm::new(Term::Intercept, 50.0),
            WeightedTerm::new(Term::Main(3), -20.0),
            WeightedTerm::new(Term::Main(0), 5.0),
            WeightedTerm::new(Term::Interaction(0, 3), 4.0),
        ],
        noise_sd: 0.3,
        target_noise_sd: Some(1.0),
        shift: ShiftSpec::Power {
            a: 1.0,
            gamma: 1.3,
            b: 0.0,
        },
        seed: 4,
        metric: Metric::InferenceTime,
        source_env: EnvironmentId::new("s", "m", "w").unwrap(),
        target_env: EnvironmentId::new("t", "m", "w").unwrap(),
    };
    let pair = scenario.generate().map_err(|e| e.to_string())?;
    let mut exp = Experiment::new(pair.source, vec![pair.target], Metric::InferenceTime);
    exp.learners = vec![LearnerKind::Rt];
    let large = run_experiment(&exp).map_err(|e| e.to_string())?;
    ensure(large.len() == 4, || format!("{} rows on the 46,080 space", large.len()))?;
    identical_costs(&large, 1125)?;

    let start = Instant::now();
    let exp = bench_4096();
    let reports = run_experiment(&exp).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(reports.len() == 8, || {
        format!("{} rows on the 4,096 space", reports.len())
    })?;
    identical_costs(&reports, 100)?;
    emit_report(&reports, reports_dir).map_err(|e| e.to_string())?;
    ensure(elapsed < Duration::from_secs(300), || {
        format!("4,096-config bench took {elapsed:?}")
    })?;
    let costs: Vec<String> = large.iter().map(|r| format!("{}={}", r.strategy, r.cost)).collect();
    Ok(format!(
        "budget(46080)=1125; 46,080-space costs {}; 4,096-space bench (rt+nn, 2 seeds) {:.1}s (limit 300s)",
        costs.join(" "),
        elapsed.as_secs_f64()
    ))
}

fn criterion_5() -> Outcome {
    let space = Arc::new(ConfigurationSpace::from_level_counts(&[4, 4, 4]).map_err(|e| e.to_string())?);
    let env = EnvironmentId::new("s", "m", "w").unwrap();
    let records = space
        .enumerate()
        .map(|c| {
            let x = encode(c.level_indices(), &[4, 4, 4]);
            let value = 5.0 + 3.0 * x[0] + (2.0 * x[1]).exp() * x[2];
            MeasurementRecord {
                config: c,
                metric: Metric::Energy,
                value,
                replicate: 0,
            }
        })
        .collect();
    let source = MeasurementDataset::new(env, Arc::clone(&space), records).map_err(|e| e.to_string())?;
    let oracle = Oracle::new(&source).map_err(|e| e.to_string())?;
    let settings = LearnerSettings::default();
    for learner in [LearnerKind::Rt, LearnerKind::Nn] {
        let model =
            fit_learner(learner, &source.training_set(Metric::Energy), &settings, 9).map_err(|e| e.to_string())?;
        let ctx = TransferContext {
            source_model: &model,
            source_dataset: &source,
            target_oracle: &oracle,
            space: &space,
            metric: Metric::Energy,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            learner,
            settings: &settings,
            seed: 9,
        };
        let out = run_strategy(Strategy::Dm, &ctx, StepwiseParams::default()).map_err(|e| e.to_string())?;
        for c in space.enumerate() {
            let a = model.predict(&c, &space).map_err(|e| e.to_string())?;
            let b = out.target_model.predict(&c, &space).map_err(|e| e.to_string())?;
            ensure(a.to_bits() == b.to_bits(), || {
                format!("{learner}: {c} differs ({a} vs {b})")
            })?;
        }
        ensure(out.cost == 0 && oracle.tally() == 0, || {
            "dm evaluated target configurations".into()
        })?;
    }
    Ok("rt and nn: 64/64 configurations bit-identical, cost 0".into())
}

fn criterion_6() -> Outcome {
    let mut scenario = presets::power_shift(6);
    scenario.noise_sd = 0.0;
    scenario.target_noise_sd = Some(0.0);
    scenario.shift = ShiftSpec::Linear { a: 2.0, b: 5.0 };
    let pair = scenario.generate().map_err(|e| e.to_string())?;
    let space = Arc::clone(pair.source.space());
    let exact = TreeParams {
        max_depth: None,
        min_leaf: 1,
    };
    let source_model = PerformanceModel::Tree(
        fit_tree(&pair.source.training_set(Metric::InferenceTime), exact).map_err(|e| e.to_string())?,
    );
    let oracle = Oracle::new(&pair.target).map_err(|e| e.to_string())?;
    let settings = LearnerSettings::default();
    let ctx = TransferContext {
        source_model: &source_model,
        source_dataset: &pair.source,
        target_oracle: &oracle,
        space: &space,
        metric: Metric::InferenceTime,
        budget_fraction: DEFAULT_BUDGET_FRACTION,
        learner: LearnerKind::Rt,
        settings: &settings,
        seed: 6,
    };
    let out = run_strategy(Strategy::Lms, &ctx, StepwiseParams::default()).map_err(|e| e.to_string())?;
    let PerformanceModel::Shifted {
        shift: ShiftModel::Linear { intercept, slope },
        ..
    } = out.target_model
    else {
        return Err("lms did not produce a linear shift".into());
    };
    ensure((intercept - 5.0).abs() <= 1e-6 && (slope - 2.0).abs() <= 1e-6, || {
        format!("(b0, b1) = ({intercept}, {slope})")
    })?;
    let err = exhaustive_err(&pair, &out.target_model)?;
    ensure(err < 0.1, || format!("exhaustive Err {err}% >= 0.1%"))?;
    Ok(format!(
        "(b0, b1) = ({intercept:.9}, {slope:.9}) (tol 1e-6); exhaustive Err {err:.2e}% (< 0.1%)"
    ))
}

fn exhaustive_err(pair: &SyntheticPair, model: &PerformanceModel) -> Result<f64, String> {
    let space = pair.source.space();
    let mut truth = Vec::with_capacity(space.cardinality());
    let mut pred = Vec::with_capacity(space.cardinality());
    for c in space.enumerate() {
        truth.push(pair.target_truth(&c));
        pred.push(model.predict(&c, space).map_err(|e| e.to_string())?);
    }
    mape(&truth, &pred).map_err(|e| e.to_string())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let settings = LearnerSettings::default();
    let mut errs: std::collections::BTreeMap<(LearnerKind, Strategy), Vec<f64>> = Default::default();
    for seed in 0..10u64 {
        let pair = presets::power_shift(seed).generate().map_err(|e| e.to_string())?;
        let space = Arc::clone(pair.source.space());
        let (pool, test) = pair.target.split(10, seed).map_err(|e| e.to_string())?;
        for learner in [LearnerKind::Rt, LearnerKind::Nn] {
            let source_model = fit_learner(
                learner,
                &pair.source.training_set(Metric::InferenceTime),
                &settings,
                seed,
            )
            .map_err(|e| e.to_string())?;
            for strategy in Strategy::ALL {
                let oracle = Oracle::new(&pool).map_err(|e| e.to_string())?;
                let ctx = TransferContext {
                    source_model: &source_model,
                    source_dataset: &pair.source,
                    target_oracle: &oracle,
                    space: &space,
                    metric: Metric::InferenceTime,
                    budget_fraction: DEFAULT_BUDGET_FRACTION,
                    learner,
                    settings: &settings,
                    seed,
                };
                let out = run_strategy(strategy, &ctx, StepwiseParams::default()).map_err(|e| e.to_string())?;
                let held_out = test.distinct_configs();
                ensure(oracle.tally_of(&held_out) == 0, || {
                    "held-out configuration queried".into()
                })?;
                errs.entry((learner, strategy))
                    .or_default()
                    .push(exhaustive_err(&pair, &out.target_model)?);
            }
        }
    }
    let elapsed = start.elapsed();
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for learner in [LearnerKind::Rt, LearnerKind::Nn] {
        let m = |s: Strategy| median(errs[&(learner, s)].clone());
        let (gs, nlms, lms, dm) = (m(Strategy::Gs), m(Strategy::Nlms), m(Strategy::Lms), m(Strategy::Dm));
        summary.push(format!("{learner}: gs {gs:.3} nlms {nlms:.3} lms {lms:.3} dm {dm:.2}"));
        if !(gs < nlms && nlms < lms && gs < dm) {
            failures.push(format!("{learner} ordering violated"));
        }
    }
    if elapsed >= Duration::from_secs(900) {
        failures.push(format!("runtime {elapsed:?} >= 15 min"));
    }
    let text = format!(
        "median exhaustive Err% over 10 seeds; {}; {:.0}s",
        summary.join("; "),
        elapsed.as_secs_f64()
    );
    if failures.is_empty() {
        Ok(text)
    } else {
        Err(format!("{}: {text}", failures.join(", ")))
    }
}

fn criterion_8() -> Outcome {
    // piecewise-constant truth
    let counts = [4, 5, 6];
    let rows: Vec<Vec<f64>> = grid(&counts).iter().map(|l| encode(l, &counts)).collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|x| (if x[0] < 0.5 { 3.0 } else { 7.0 }) + if x[2] > 0.6 { 2.0 } else { 0.0 })
        .collect();
    let train = TrainingSet::new(rows.clone(), targets.clone()).map_err(|e| e.to_string())?;
    let tree = fit_tree(&train, TreeParams::default()).map_err(|e| e.to_string())?;
    let pred: Vec<f64> = rows.iter().map(|x| tree.predict_features(x)).collect();
    let rt_err = mape(&targets, &pred).map_err(|e| e.to_string())?;
    ensure(rt_err == 0.0, || format!("rt training Err {rt_err}"))?;

    // forest of one tree, no bootstrap, all features == CART
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|x| 1.0 + 4.0 * x[0] * x[1] + x[2].sin() + rng.random::<f64>())
        .collect();
    let train = TrainingSet::new(rows, targets).map_err(|e| e.to_string())?;
    let params = ForestParams {
        n_trees: 1,
        features_per_split: Some(3),
        bootstrap: false,
        tree: TreeParams::default(),
    };
    let forest = fit_forest(&train, params, 77).map_err(|e| e.to_string())?;
    let cart = fit_tree(&train, TreeParams::default()).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        ensure(
            forest.predict_features(&x).to_bits() == cart.predict_features(&x).to_bits(),
            || format!("forest-of-one differs from cart at {x:?}"),
        )?;
    }

    // gradient check
    let mut net = NeuralNetModel::initialize(3, 21);
    let mut params: Vec<f64> = net.parameters();
    for p in params.iter_mut() {
        *p += rng.random_range(-0.1..0.1);
    }
    net.set_parameters(&params);
    let batch: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let t: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
    let analytic = net.batch_gradient(&batch, &t);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let mut plus = net.clone();
        let mut p = params.clone();
        p[k] += h;
        plus.set_parameters(&p);
        let mut minus = net.clone();
        p[k] -= 2.0 * h;
        minus.set_parameters(&p);
        let fd = (plus.batch_loss(&batch, &t) - minus.batch_loss(&batch, &t)) / (2.0 * h);
        let denom = fd.abs().max(analytic[k].abs()).max(1e-8);
        worst = worst.max((fd - analytic[k]).abs() / denom);
    }
    ensure(worst < 1e-4, || format!("gradient check max relative error {worst:e}"))?;
    Ok(format!(
        "rt training Err 0; forest-of-one == cart on 100 inputs; nn gradient max relative error {worst:.1e} (< 1e-4)"
    ))
}

fn criterion_9(first: &std::path::Path, second: &std::path::Path) -> Outcome {
    let reports = run_experiment(&bench_4096()).map_err(|e| e.to_string())?;
    let files = emit_report(&reports, second).map_err(|e| e.to_string())?;
    let mut names: Vec<_> = std::fs::read_dir(first)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    ensure(names.len() == 2 + files.plots.len(), || {
        format!("file sets differ: {names:?}")
    })?;
    for name in &names {
        let a = std::fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{} differs between runs", name.to_string_lossy()))?;
    }
    Ok(format!("{} report files byte-identical across two runs", names.len()))
}

fn criterion_10() -> Outcome {
    let pair = presets::wide_range_energy(10).generate().map_err(|e| e.to_string())?;
    let space = pair.source.space();
    ensure(pair.source.len() == space.cardinality(), || {
        "dataset not full-factorial".into()
    })?;
    let values: Vec<f64> = pair.source.records().iter().map(|r| r.value).collect();
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    let ratio = max / min;
    ensure(ratio >= 20.0, || format!("max/min = {ratio}"))?;
    Ok(format!("{} configurations, max/min = {ratio:.2} (>= 20)", values.len()))
}

fn main() {
    let dir_a = tempfile::tempdir().expect("temp dir");
    let dir_b = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("1 stepwise recovery", Box::new(criterion_1)),
        ("2 coefficient-prune boundary", Box::new(criterion_2)),
        ("3 mape oracle equivalence", Box::new(criterion_3)),
        ("4 budget accounting", Box::new(|| criterion_4(dir_a.path()))),
        ("5 dm identity", Box::new(criterion_5)),
        ("6 lms exactness", Box::new(criterion_6)),
        ("7 strategy direction", Box::new(criterion_7)),
        ("8 learner sanity", Box::new(criterion_8)),
        ("9 determinism", Box::new(|| criterion_9(dir_a.path(), dir_b.path()))),
        ("10 dynamic range", Box::new(criterion_10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
