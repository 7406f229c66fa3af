mod spec;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use perfxfer::evaluation::{emit_report, evaluate_model, parse_report_csv, render_table, run_experiment, ErrReport};
use perfxfer::learners::{fit_learner, LearnerSettings, StepwiseParams};
use perfxfer::synthetic::Scenario;
use perfxfer::transfer::{run_strategy, Strategy, TransferContext, DEFAULT_BUDGET_FRACTION};
use perfxfer::{ConfigurationSpace, LearnerKind, MeasurementDataset, Metric, Oracle, PerformanceModel};
use serde::Serialize;

use crate::spec::ExperimentSpec;

#[derive(Parser)]
#[command(
    name = "perfxfer",
    version,
    about = "Performance models of configurable systems and their transfer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate source and target datasets from a scenario file.
    Synth(SynthArgs),
    /// Fit a performance model on one dataset.
    Fit(FitArgs),
    /// Carry a source model to a target environment with one strategy.
    Transfer(TransferArgs),
    /// Report the Err of a model on a dataset.
    Eval(EvalArgs),
    /// Run an experiment spec and write report files.
    Bench(BenchArgs),
    /// Render a report CSV as a table, or re-emit all report files.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Output directory for source.csv, target.csv and truth.toml.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario's space with this space file.
    #[arg(long)]
    space: Option<PathBuf>,
}

#[derive(Args)]
struct ModelInput {
    /// Space TOML file.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "inference_time")]
    metric: Metric,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Measurement CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "rt")]
    learner: LearnerKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Source measurement CSV.
    #[arg(long)]
    source: PathBuf,
    /// Target measurement CSV; every configuration in it may be sampled.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long, default_value = "rt")]
    learner: LearnerKind,
    /// Source model JSON; fitted on the source data when absent.
    #[arg(long)]
    source_model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BUDGET_FRACTION)]
    budget_fraction: f64,
    #[arg(long, default_value_t = StepwiseParams::default().fs_epsilon)]
    fs_epsilon: f64,
    #[arg(long, default_value_t = StepwiseParams::default().be_alpha)]
    be_alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target model JSON file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long)]
    model: PathBuf,
    /// Measurement CSV; replicate means are the truth.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec TOML file.
    spec: PathBuf,
    /// Overrides the spec's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent matrix cells; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSV written by `bench`.
    input: PathBuf,
    /// Directory to re-emit the table and plot files into; prints the table when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_space(path: &Path) -> Result<Arc<ConfigurationSpace>> {
    let space = ConfigurationSpace::load(path).with_context(|| format!("loading space {}", path.display()))?;
    Ok(Arc::new(space))
}

fn load_dataset(path: &Path, space: &Arc<ConfigurationSpace>) -> Result<MeasurementDataset> {
    MeasurementDataset::load_csv(path, Arc::clone(space)).with_context(|| format!("loading {}", path.display()))
}

fn save_model(model: &PerformanceModel, path: &Path) -> Result<()> {
    model.save(path).with_context(|| format!("writing {}", path.display()))
}

fn option_names(space: &ConfigurationSpace, options: impl IntoIterator<Item = usize>) -> Vec<String> {
    options.into_iter().map(|i| space.options()[i].name.clone()).collect()
}

#[derive(Serialize)]
struct TruthFile<'a> {
    influential_options: Vec<String>,
    surface: &'a perfxfer::synthetic::GroundTruthSurface,
    shift: &'a perfxfer::synthetic::ShiftSpec,
    target_noise_sd: f64,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut scenario =
        Scenario::load(&args.scenario).with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(space) = &args.space {
        scenario.space = (*load_space(space)?).clone();
    }
    let pair = scenario.generate()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    pair.source.save_csv(args.out.join("source.csv"))?;
    pair.target.save_csv(args.out.join("target.csv"))?;
    let influential = option_names(&scenario.space, pair.truth.true_influential().options);
    let truth = TruthFile {
        influential_options: influential.clone(),
        surface: &pair.truth,
        shift: &pair.shift,
        target_noise_sd: pair.target_noise_sd,
    };
    fs::write(args.out.join("truth.toml"), toml::to_string(&truth)?)?;
    println!(
        "wrote {} source and {} target records",
        pair.source.len(),
        pair.target.len()
    );
    println!("true influential options: {}", influential.join(", "));
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let space = load_space(&args.input.space)?;
    let data = load_dataset(&args.data, &space)?;
    let metric = args.input.metric;
    let train = data.training_set(metric);
    if train.is_empty() {
        bail!("{} has no {metric} records", args.data.display());
    }
    let model = fit_learner(args.learner, &train, &LearnerSettings::default(), args.seed)?;
    save_model(&model, &args.out)?;
    let fragment = evaluate_model(&model, &space, &data.mean_table(metric))?;
    println!(
        "{} model on {} configurations, training Err {:.4}%",
        args.learner,
        train.len(),
        fragment.err_percent
    );
    Ok(())
}

fn cmd_transfer(args: TransferArgs) -> Result<()> {
    let space = load_space(&args.input.space)?;
    let metric = args.input.metric;
    let source = load_dataset(&args.source, &space)?;
    let target = load_dataset(&args.target, &space)?;
    let settings = LearnerSettings::default();
    let source_model = match &args.source_model {
        Some(p) => PerformanceModel::load(p).with_context(|| format!("loading model {}", p.display()))?,
        None => fit_learner(args.learner, &source.training_set(metric), &settings, args.seed)?,
    };
    let oracle = Oracle::new(&target)?;
    let ctx = TransferContext {
        source_model: &source_model,
        source_dataset: &source,
        target_oracle: &oracle,
        space: &space,
        metric,
        budget_fraction: args.budget_fraction,
        learner: args.learner,
        settings: &settings,
        seed: args.seed,
    };
    let stepwise = StepwiseParams {
        fs_epsilon: args.fs_epsilon,
        be_alpha: args.be_alpha,
    };
    let outcome = run_strategy(args.strategy, &ctx, stepwise)?;
    save_model(&outcome.target_model, &args.out)?;
    println!(
        "strategy {} cost {} of budget {}",
        outcome.strategy,
        outcome.cost,
        ctx.budget()?
    );
    if let Some(infl) = &outcome.influence {
        println!(
            "influential options: {}",
            option_names(&space, infl.options.iter().copied()).join(", ")
        );
    }
    if let Some(fallback) = outcome.fallback {
        println!("fallback: {fallback:?}");
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let space = load_space(&args.input.space)?;
    let data = load_dataset(&args.data, &space)?;
    let model =
        PerformanceModel::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let table = data.mean_table(args.input.metric);
    let fragment = evaluate_model(&model, &space, &table)?;
    println!(
        "Err {:.4}% (sd {:.4}) over {} configurations",
        fragment.err_percent,
        fragment.err_dispersion,
        table.len()
    );
    Ok(())
}

/// Emits the report into a fresh directory next to `out`, then moves the files into `out`.
fn emit_atomically(reports: &[ErrReport], out: &Path) -> Result<Vec<PathBuf>> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let staging = tempfile::Builder::new()
        .prefix(".perfxfer-report-")
        .tempdir_in(&parent)
        .with_context(|| format!("creating staging directory in {}", parent.display()))?;
    let files = emit_report(reports, staging.path())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for src in std::iter::once(files.csv).chain([files.table]).chain(files.plots) {
        let dest = out.join(src.file_name().expect("report files have names"));
        fs::rename(&src, &dest).with_context(|| format!("moving report file to {}", dest.display()))?;
        written.push(dest);
    }
    Ok(written)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&args.spec)?;
    let exp = spec.experiment(args.workers)?;
    let reports = run_experiment(&exp)?;
    let out = args.out.unwrap_or(spec.out);
    let written = emit_atomically(&reports, &out)?;
    print!("{}", render_table(&reports));
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let reports = parse_report_csv(file).with_context(|| format!("parsing {}", args.input.display()))?;
    match args.out {
        Some(out) => {
            let written = emit_atomically(&reports, &out)?;
            println!("wrote {} files to {}", written.len(), out.display());
        }
        None => print!("{}", render_table(&reports)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
