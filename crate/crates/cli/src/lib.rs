//! The `seqscm` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or input failure,
//! 3 scorer or backend failure.

mod inputs;
mod units;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use seqscm::benchmark::{
    benchmark_model, generate_dataset, metadata_path, read_dataset, variation_seed, write_atomic, write_dataset,
    ArmPair, AuditConfig, BenchmarkDataset, OutcomeTarget,
};
use seqscm::estimators::{fit, EstimationData, Method};
use seqscm::metrics::{evaluate, summarize_reports, Estimate, IntervalSet, MetricReport};
use seqscm::sampling::{counterfactual_unit, interventional_unit, observational_unit, Intervention};
use seqscm::scm::VariationId;
use seqscm::scorer::{ScorerError, ScorerRef};
use seqscm::spec::{instantiate_variation, sample_variations, ScmSpecDocument};

use inputs::{load_spec_arg, parse_assignment, parse_scorer, parse_scorer_list};

/// A problem with how the command was invoked.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(name = "seqscm", version, about = "Sequence-driven structural causal models and effect benchmarks")]
struct Cli {
    /// Master seed; required by every command that samples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output file or directory, depending on the command.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// tabular:PATH | PATH.json | remote[:URL] | uniform | mock:peaked | mock:degenerate
    #[arg(long, global = true)]
    scorer: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check spec files and report their size.
    Validate {
        /// Spec paths or bundled:NAME.
        #[arg(required = true)]
        specs: Vec<String>,
    },
    /// Draw observational or interventional units.
    Sample(SampleArgs),
    /// Counterfactuals of previously sampled units.
    Counterfactual(CounterfactualArgs),
    /// Generate benchmark datasets across phrasing variations.
    Benchmark(BenchmarkArgs),
    /// Remove columns from a dataset's estimator-visible covariates.
    Project(ProjectArgs),
    /// Fit an effect estimator and write per-unit effect predictions.
    Estimate(EstimateArgs),
    /// Score estimates against ground truth (with -o, also NAME.summary.json).
    Evaluate(EvaluateArgs),
    /// Compare the effects implied by scorers across variations.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Obs,
    Do,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Spec path or bundled:NAME.
    #[arg(long)]
    spec: String,
    /// Phrasing choice per variable, e.g. 0-3-1 (defaults to all zeros).
    #[arg(long)]
    variation: Option<String>,
    /// Independent sample stream within the same model.
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::Obs)]
    mode: Mode,
    /// Intervention var=index (with --mode do).
    #[arg(long)]
    set: Option<String>,
    /// Number of units.
    #[arg(long)]
    n: usize,
}

#[derive(Debug, Args)]
struct CounterfactualArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Units file written by `sample`.
    #[arg(long)]
    from: PathBuf,
    /// Intervention var=index.
    #[arg(long)]
    set: String,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Spec path or bundled:NAME.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 1)]
    variations: usize,
    #[arg(long, default_value_t = 1)]
    datasets: usize,
    #[arg(long, default_value_t = 1000)]
    size: usize,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Hide every exogenous variable.
    #[arg(long)]
    hide_exogenous: bool,
}

#[derive(Debug, Args)]
struct TargetArgs {
    /// cat:K, prob:K or logp:K.
    #[arg(long, default_value = "prob:0")]
    target: String,
    /// Control and treated treatment values, e.g. 0,1.
    #[arg(long, default_value = "0,1")]
    arms: String,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "adjusted_ols")]
    method: String,
    #[command(flatten)]
    target: TargetArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// One or more dataset files.
    #[arg(long, required = true, num_args = 1..)]
    dataset: Vec<PathBuf>,
    /// Estimator to fit, or the label for --predictions.
    #[arg(long, default_value = "adjusted_ols")]
    method: String,
    /// Per-unit predictions (unit_id, cate_hat, optional lower, upper)
    /// instead of fitting; only with a single dataset.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[command(flatten)]
    target: TargetArgs,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Spec path or bundled:NAME.
    #[arg(long)]
    spec: String,
    /// label=config,... with configs as for --scorer.
    #[arg(long)]
    scorers: Option<String>,
    #[arg(long, default_value_t = 1)]
    variations: usize,
    #[arg(long, default_value_t = 1)]
    datasets: usize,
    #[arg(long, default_value_t = 1000)]
    size: usize,
    /// Comma-separated targets.
    #[arg(long, default_value = "prob:0")]
    targets: String,
    #[arg(long, default_value = "0,1")]
    arms: String,
}

/// Runs the command line; returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.chain().any(|c| c.is::<ScorerError>()) {
        3
    } else if e.is::<Usage>() {
        1
    } else {
        2
    }
}

fn execute(cli: Cli, argv: &[String]) -> Result<i32> {
    if cli.workers == 0 {
        bail!(Usage("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build()?;
    let ctx = RunContext { seed: cli.seed, output: cli.output.clone(), scorer: cli.scorer.clone(), echo: echo(argv) };
    pool.install(|| match cli.command {
        Command::Validate { specs } => validate(&specs),
        Command::Sample(args) => sample(&ctx, args),
        Command::Counterfactual(args) => counterfactual(&ctx, args),
        Command::Benchmark(args) => benchmark(&ctx, args),
        Command::Project(args) => project(&ctx, args),
        Command::Estimate(args) => estimate(&ctx, args),
        Command::Evaluate(args) => evaluate_cmd(&ctx, args),
        Command::Audit(args) => audit(&ctx, args),
    })
}

/// The invocation with flags that cannot change output content
/// (`--workers`, `--output`) removed.
fn echo(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip_next = false;
    for (i, a) in argv.iter().enumerate() {
        if skip_next {
            skip_next = false;
            continue;
        }
        if i == 0 {
            out.push("seqscm".to_string());
            continue;
        }
        if matches!(a.as_str(), "--workers" | "--output" | "-o") {
            skip_next = true;
            continue;
        }
        if a.starts_with("--workers=") || a.starts_with("--output=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

struct RunContext {
    seed: Option<u64>,
    output: Option<PathBuf>,
    scorer: Option<String>,
    echo: Vec<String>,
}

impl RunContext {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Usage("--seed is required for sampling".into()).into())
    }

    fn scorer(&self, spec: &ScmSpecDocument) -> Result<ScorerRef> {
        let arg = self.scorer.as_deref().ok_or_else(|| Usage("--scorer is required".into()))?;
        parse_scorer(arg, None, spec)
    }

    fn output_dir(&self) -> Result<&Path> {
        self.output.as_deref().ok_or_else(|| Usage("--output DIR is required".into()).into())
    }

    /// Writes to `--output` atomically, or to stdout.
    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.output {
            Some(path) => {
                ensure_parent(path)?;
                Ok(write_atomic(path, bytes)?)
            }
            None => {
                io::stdout().lock().write_all(bytes)?;
                Ok(())
            }
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn pretty(value: &serde_json::Value) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    text.into_bytes()
}

fn validate(specs: &[String]) -> Result<i32> {
    let mut failed = 0;
    for arg in specs {
        let checked = load_spec_arg(arg).and_then(|spec| {
            spec.check()?;
            Ok(spec)
        });
        match checked {
            Ok(spec) => {
                for w in spec.warnings() {
                    eprintln!("warning: {arg}: {w}");
                }
                println!(
                    "ok {arg}: {} ({} variables, {} edges, {} variations)",
                    spec.name,
                    spec.variables.len(),
                    spec.edges.len(),
                    spec.variation_count()
                );
            }
            Err(e) if e.is::<Usage>() => return Err(e),
            Err(e) => {
                failed += 1;
                eprintln!("invalid {arg}: {e:#}");
            }
        }
    }
    Ok(if failed > 0 { 2 } else { 0 })
}

fn model(ctx: &RunContext, args: &ModelArgs) -> Result<(ScmSpecDocument, seqscm::scm::SdScm)> {
    let spec = load_spec_arg(&args.spec)?;
    spec.check()?;
    let variation = match &args.variation {
        Some(v) => v.parse::<VariationId>().map_err(|e| Usage(format!("--variation: {e}")))?,
        None => VariationId::zeros(spec.variables.len()),
    };
    let scorer = ctx.scorer(&spec)?;
    let scm = instantiate_variation(&spec, &variation, scorer, ctx.seed()?)?;
    Ok((spec, scm))
}

fn units_meta(ctx: &RunContext, spec: &ScmSpecDocument, scm: &seqscm::scm::SdScm, n: usize) -> serde_json::Value {
    serde_json::json!({
        "spec_name": spec.name,
        "variation": scm.variation().to_string(),
        "scorer": scm.scorer().label(),
        "seed": scm.master_seed(),
        "units": n,
        "command": ctx.echo,
    })
}

fn write_units_output(
    ctx: &RunContext,
    spec: &ScmSpecDocument,
    scm: &seqscm::scm::SdScm,
    units: &[seqscm::sampling::Unit],
) -> Result<i32> {
    let mut buf = Vec::new();
    units::write_units(scm, units, &mut buf)?;
    ctx.emit(&buf)?;
    if let Some(path) = &ctx.output {
        write_atomic(&metadata_path(path), &pretty(&units_meta(ctx, spec, scm, units.len())))?;
    }
    Ok(0)
}

fn sample(ctx: &RunContext, args: SampleArgs) -> Result<i32> {
    let (spec, scm) = model(ctx, &args.model)?;
    let intervention = match (args.mode, &args.set) {
        (Mode::Obs, Some(_)) => bail!(Usage("--set needs --mode do".into())),
        (Mode::Do, None) => bail!(Usage("--mode do needs --set var=index".into())),
        (Mode::Obs, None) => None,
        (Mode::Do, Some(s)) => {
            let (var, value) = parse_assignment(s)?;
            Some(Intervention::new(var, value))
        }
    };
    let stream = args.model.stream;
    let units = (0..args.n as u64)
        .into_par_iter()
        .map(|i| match &intervention {
            None => observational_unit(&scm, stream, i),
            Some(iv) => interventional_unit(&scm, iv, stream, i),
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_units_output(ctx, &spec, &scm, &units)
}

fn counterfactual(ctx: &RunContext, args: CounterfactualArgs) -> Result<i32> {
    let (spec, scm) = model(ctx, &args.model)?;
    let (var, value) = parse_assignment(&args.set)?;
    let intervention = Intervention::new(var, value);
    let file = fs::File::open(&args.from).with_context(|| format!("opening {}", args.from.display()))?;
    let factual = units::read_units(&scm, file)?;
    let stream = args.model.stream;
    let units = factual
        .par_iter()
        .map(|u| counterfactual_unit(&scm, u, &intervention, stream))
        .collect::<Result<Vec<_>, _>>()?;
    write_units_output(ctx, &spec, &scm, &units)
}

fn benchmark(ctx: &RunContext, args: BenchmarkArgs) -> Result<i32> {
    let spec = load_spec_arg(&args.spec)?;
    spec.check()?;
    let seed = ctx.seed()?;
    let scorer = ctx.scorer(&spec)?;
    let out = ctx.output_dir()?;
    if args.variations == 0 || args.datasets == 0 || args.size == 0 {
        bail!(Usage("--variations, --datasets and --size must be at least 1".into()));
    }
    let variations = sample_variations(&spec, args.variations, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = Vec::with_capacity(variations.len());
    for (ordinal, variation) in variations.iter().enumerate() {
        let (scm, design) = benchmark_model(&spec, variation, ordinal as u64, scorer.clone(), seed)?;
        let dir_name = format!("variation_{ordinal:03}");
        let dir = out.join(&dir_name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let files = (0..args.datasets)
            .into_par_iter()
            .map(|d| -> Result<String> {
                let mut ds = generate_dataset(&scm, &design, &spec.name, args.size, d as u64)?;
                ds.meta.command = ctx.echo.clone();
                let name = format!("dataset_{d:03}.csv");
                write_dataset(&dir.join(&name), &ds)?;
                Ok(format!("{dir_name}/{name}"))
            })
            .collect::<Result<Vec<_>>>()?;
        manifest.push(serde_json::json!({
            "ordinal": ordinal,
            "variation": variation.to_string(),
            "seed": variation_seed(seed, ordinal as u64),
            "datasets": files,
        }));
    }
    let manifest = serde_json::json!({
        "spec_name": spec.name,
        "scorer": scorer.label(),
        "seed": seed,
        "variations": args.variations,
        "datasets_per_variation": args.datasets,
        "size": args.size,
        "treatment": spec.treatment,
        "outcome": spec.outcome,
        "command": ctx.echo,
        "runs": manifest,
    });
    write_atomic(&out.join("manifest.json"), &pretty(&manifest))?;
    eprintln!("wrote {} datasets of {} units to {}", args.variations * args.datasets, args.size, out.display());
    Ok(0)
}

fn project(ctx: &RunContext, args: ProjectArgs) -> Result<i32> {
    if !args.hide_exogenous {
        bail!(Usage("nothing to project; pass --hide-exogenous".into()));
    }
    let ds = read_dataset(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let mut projected = ds.hidden_projection();
    projected.meta.command = ctx.echo.clone();
    let path = ctx.output.as_deref().ok_or_else(|| Usage("--output FILE is required".into()))?;
    ensure_parent(path)?;
    write_dataset(path, &projected)?;
    eprintln!("hid {} column(s): {}", projected.meta.hidden.len(), projected.meta.hidden.join(", "));
    Ok(0)
}

fn parse_arms(arg: &str) -> Result<ArmPair> {
    let bad = || Usage(format!("--arms expects CONTROL,TREATED, got {arg:?}"));
    let (a, b) = arg.split_once(',').ok_or_else(bad)?;
    Ok(ArmPair::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_target(arg: &str) -> Result<OutcomeTarget> {
    arg.parse().map_err(|e: seqscm::benchmark::BenchmarkError| Usage(e.to_string()).into())
}

fn parse_method(arg: &str) -> Result<Method> {
    arg.parse().map_err(|e: seqscm::estimators::EstimatorError| Usage(e.to_string()).into())
}

fn estimate(ctx: &RunContext, args: EstimateArgs) -> Result<i32> {
    let method = parse_method(&args.method)?;
    let target = parse_target(&args.target.target)?;
    let arms = parse_arms(&args.target.arms)?;
    let ds = read_dataset(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let data = EstimationData::from_dataset(&ds, &target, arms)?;
    let out = fit(method, &data)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["unit_id", "cate_hat"])?;
    for (id, c) in out.unit_ids.iter().zip(&out.cate) {
        w.write_record([id.to_string(), format!("{c:?}")])?;
    }
    ctx.emit(&w.into_inner().map_err(|e| anyhow!(e.to_string()))?)?;
    let ridge = out.diagnostics.iter().any(|d| d.ridge);
    eprintln!(
        "{method} {target}: ate={:.6}{}{}",
        out.ate,
        out.ate_se.map(|se| format!(" se={se:.6}")).unwrap_or_default(),
        if ridge { " (ridge fallback)" } else { "" }
    );
    Ok(0)
}

struct Predictions {
    cate: Vec<f64>,
    intervals: Option<IntervalSet>,
}

fn read_predictions(path: &Path, ds: &BenchmarkDataset) -> Result<Predictions> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let id = col("unit_id").ok_or_else(|| anyhow!("predictions need a unit_id column"))?;
    let cate = col("cate_hat").ok_or_else(|| anyhow!("predictions need a cate_hat column"))?;
    let bounds = col("lower").zip(col("upper"));
    let mut by_id = std::collections::HashMap::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> { Ok(rec.get(i).unwrap_or_default().trim().parse()?) };
        let unit: u64 = rec.get(id).unwrap_or_default().trim().parse()?;
        let interval = bounds.map(|(l, u)| Ok::<_, anyhow::Error>((num(l)?, num(u)?))).transpose()?;
        by_id.insert(unit, (num(cate)?, interval));
    }
    let mut out = Predictions { cate: Vec::with_capacity(ds.len()), intervals: None };
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for record in &ds.records {
        let (c, iv) = by_id.get(&record.unit_id).ok_or_else(|| anyhow!("no prediction for unit {}", record.unit_id))?;
        out.cate.push(*c);
        if let Some((l, u)) = iv {
            lower.push(*l);
            upper.push(*u);
        }
    }
    if bounds.is_some() {
        out.intervals = Some(IntervalSet::new(lower, upper)?);
    }
    Ok(out)
}

fn evaluate_cmd(ctx: &RunContext, args: EvaluateArgs) -> Result<i32> {
    let target = parse_target(&args.target.target)?;
    let arms = parse_arms(&args.target.arms)?;
    if args.predictions.is_some() && args.dataset.len() != 1 {
        bail!(Usage("--predictions works with exactly one --dataset".into()));
    }
    let mut reports: Vec<MetricReport> = Vec::with_capacity(args.dataset.len());
    for path in &args.dataset {
        let ds = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
        let id = path.display().to_string();
        let report = match &args.predictions {
            Some(pred_path) => {
                let p = read_predictions(pred_path, &ds)?;
                let ate = p.cate.iter().sum::<f64>() / p.cate.len() as f64;
                let estimate = Estimate { method: &args.method, ate, cate: &p.cate, intervals: p.intervals.as_ref() };
                evaluate(&ds, &id, &estimate, &target, arms)?
            }
            None => {
                let method = parse_method(&args.method)?;
                let data = EstimationData::from_dataset(&ds, &target, arms)?;
                let out = fit(method, &data)?;
                let estimate = Estimate { method: method.name(), ate: out.ate, cate: &out.cate, intervals: None };
                evaluate(&ds, &id, &estimate, &target, arms)?
            }
        };
        if report.floored_units > 0 {
            log::warn!("{id}: {} unit(s) used the log floor", report.floored_units);
        }
        reports.push(report);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &reports {
        w.serialize(r)?;
    }
    ctx.emit(&w.into_inner().map_err(|e| anyhow!(e.to_string()))?)?;
    if let Some(path) = &ctx.output {
        let summary = serde_json::json!({ "methods": summarize_reports(&reports), "command": ctx.echo });
        write_atomic(&path.with_extension("summary.json"), &pretty(&summary))?;
    }
    Ok(0)
}

fn audit(ctx: &RunContext, args: AuditArgs) -> Result<i32> {
    let spec = load_spec_arg(&args.spec)?;
    spec.check()?;
    let seed = ctx.seed()?;
    let scorers = match (&args.scorers, &ctx.scorer) {
        (Some(list), _) => parse_scorer_list(list, &spec)?,
        (None, Some(_)) => vec![ctx.scorer(&spec)?],
        (None, None) => bail!(Usage("audit needs --scorers label=config,... or --scorer".into())),
    };
    let targets = args
        .targets
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_target(t.trim()))
        .collect::<Result<Vec<_>>>()?;
    let config = AuditConfig {
        variations: args.variations,
        datasets: args.datasets,
        size: args.size,
        seed,
        targets,
        arms: parse_arms(&args.arms)?,
    };
    let out = ctx.output_dir()?;
    let report = seqscm::benchmark::audit_sate(&spec, &scorers, &config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("audit.csv"), report.csv_string()?.as_bytes())?;
    let mut summary: serde_json::Value = serde_json::from_str(&report.summary_json())?;
    summary["command"] = serde_json::json!(ctx.echo);
    write_atomic(&out.join("audit_summary.json"), &pretty(&summary))?;
    if scorers.len() < 2 {
        eprintln!("single scorer: distribution-only report");
    }
    for c in &report.comparisons {
        eprintln!(
            "{} vs {} on {}: mean difference {}, ranges overlap: {}",
            c.first,
            c.second,
            c.target,
            c.mean_difference.map_or("n/a".into(), |d| format!("{d:.4}")),
            c.ranges_overlap.map_or("n/a".into(), |o| o.to_string()),
        );
    }
    let failed = report.failures();
    if failed > 0 {
        eprintln!("error: {failed} audit cell(s) failed; see the error column of audit.csv");
        return Ok(3);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn echo_drops_workers_and_output() {
        let got = echo(&argv("/bin/seqscm --workers 8 benchmark --output /tmp/x --seed 3 --workers=2"));
        assert_eq!(got, argv("seqscm benchmark --seed 3"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&anyhow!(Usage("x".into()))), 1);
        assert_eq!(exit_code(&anyhow!(ScorerError::EmptyLabel).context("loading")), 3);
        assert_eq!(exit_code(&anyhow!("other")), 2);
    }

    #[test]
    fn arms_parse() {
        assert_eq!(parse_arms("1, 0").unwrap(), ArmPair::new(1, 0));
        assert!(parse_arms("1").unwrap_err().is::<Usage>());
    }
}
