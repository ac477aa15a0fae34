//! The `qbplab` command line.
//!
//! Every flag can also come from a JSON file given with `--config`, whose
//! keys are the long flag names. Flags on the command line win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use qbplab_core::cv::{
    kfold_tune, rdcv, simulate_benchmark, stream, BenchmarkResult, ParamGrid, RdcvPlan, SimulationPlan,
    STREAM_FOLDS, STREAM_TRAIN,
};
use qbplab_core::method::fit_method;
use qbplab_core::metrics::{auc, roc_curve};
use qbplab_core::simgen::{build_design, sample_dataset, DesignId};
use qbplab_core::{Dataset, FittedModel, Method, MethodOptions, Params};
use serde::{Deserialize, Serialize};

use crate::documents::{save_json, ModelDocument, Provenance, SimulationSidecar, TOOL_VERSION};
use crate::io::{self, DEFAULT_LABEL};
use crate::params::parse_params;
use crate::Pool;

/// Default output directory when no path flag is given.
pub const OUT_DIR_ENV: &str = "QBPLAB_OUT_DIR";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Parser, Debug)]
#[command(name = "qbplab", version, about = "Quantile based prediction laboratory")]
pub struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic dataset from a simulation design.
    Simulate(SimulateArgs),
    /// Benchmark methods by simulation (--design) or repeated double CV (--data).
    Bench(BenchArgs),
    /// In-sample ROC curve of one method fitted to a dataset.
    Roc(RocArgs),
    /// Fit one method and save the model as JSON.
    Fit(FitArgs),
    /// Score a dataset with a saved model.
    Score(ScoreArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: Option<DesignId>,
    /// Training size (default: the design's n).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV with a latent correlation matrix (default: identity).
    #[arg(long)]
    pub correlation: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BenchArgs {
    #[arg(long, conflicts_with = "data")]
    pub design: Option<DesignId>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub validation_n: Option<usize>,
    /// Tuning folds in the simulation protocol.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
    #[arg(long)]
    pub correlation: Option<PathBuf>,
}

/// Dataset plus a method, with parameters given or tuned by k-fold CV.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ModelArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub method: Option<Method>,
    /// e.g. `k=5`, `s=3`, `lambda=0.01`, `R*=1.5,2,3;v=1,2,3`. Tuned when absent.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct RocArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fills unset fields from `file`.
trait Merge: Sized {
    fn merge(self, file: Self) -> Self;
}

macro_rules! merge_fields {
    ($ty:ty { $($field:ident),* }) => {
        impl Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

merge_fields!(SimulateArgs { design, n, seed, out, correlation });
merge_fields!(BenchArgs { design, data, label, methods, reps, seed, out_dir, validation_n, folds, outer, inner, correlation });
merge_fields!(ModelArgs { data, label, method, params, seed, folds });
merge_fields!(ScoreArgs { model, data, label, out });

impl Merge for RocArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            model: self.model.merge(file.model),
            out: self.out.or(file.out),
        }
    }
}

impl Merge for FitArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            model: self.model.merge(file.model),
            out: self.out.or(file.out),
        }
    }
}

/// Flags shared by all commands that may also sit in the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct GlobalFile {
    threads: Option<usize>,
}

fn merge_config<T: Merge + serde::de::DeserializeOwned>(args: T, config: Option<&serde_json::Value>) -> Result<T> {
    match config {
        Some(value) => {
            let file: T = serde_json::from_value(value.clone()).context("invalid --config contents")?;
            Ok(args.merge(file))
        }
        None => Ok(args),
    }
}

fn usage_error(message: &str) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn required<T>(value: Option<T>, flag: &str) -> T {
    value.unwrap_or_else(|| usage_error(&format!("the argument '--{flag}' is required")))
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("QBPLAB_LOG").init();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            Some(serde_json::from_str::<serde_json::Value>(&text).with_context(|| format!("{} is not JSON", path.display()))?)
        }
        None => None,
    };
    let global: GlobalFile = match &config {
        Some(v) => serde_json::from_value(v.clone()).context("invalid --config contents")?,
        None => GlobalFile::default(),
    };
    let threads = cli.threads.or(global.threads);
    match cli.command {
        Command::Simulate(a) => cmd_simulate(merge_config(a, config.as_ref())?),
        Command::Bench(a) => cmd_bench(merge_config(a, config.as_ref())?, threads),
        Command::Roc(a) => cmd_roc(merge_config(a, config.as_ref())?),
        Command::Fit(a) => cmd_fit(merge_config(a, config.as_ref())?),
        Command::Score(a) => cmd_score(merge_config(a, config.as_ref())?),
    }
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let id = required(args.design, "design");
    let seed = args.seed.unwrap_or(1);
    let correlation = args.correlation.as_deref().map(io::load_correlation).transpose()?;
    let mut design = build_design(id, correlation)?;
    if let Some(n) = args.n {
        design = design.with_n(n);
    }
    let out = args
        .out
        .unwrap_or_else(|| default_out_dir().join(format!("design-{id}.csv")));
    ensure_parent(&out)?;
    let (ds, relevant) = sample_dataset(&design, &mut stream(seed, STREAM_TRAIN, 0))?;
    io::write_csv(&ds, &out)?;
    let sidecar = SimulationSidecar {
        design: id,
        seed,
        n: ds.n_subjects(),
        n_cases: ds.n_cases(),
        biomarkers: ds.names().to_vec(),
        relevant,
        correlation: args.correlation.map(|p| p.display().to_string()),
        tool_version: TOOL_VERSION.into(),
    };
    save_json(&sidecar, &out.with_extension("json"))?;
    log::info!("wrote {} ({} subjects)", out.display(), ds.n_subjects());
    Ok(())
}

pub fn cmd_bench(args: BenchArgs, threads: Option<usize>) -> Result<()> {
    let methods = required(args.methods.clone(), "methods");
    if methods.is_empty() {
        usage_error("'--methods' needs at least one method");
    }
    let reps = args.reps.unwrap_or(10);
    let seed = args.seed.unwrap_or(1);
    let out_dir = args.out_dir.clone().unwrap_or_else(default_out_dir);
    let pool = Pool::new(threads).context("cannot start worker threads")?;
    let result = match (&args.design, &args.data) {
        (Some(id), None) => {
            let correlation = args.correlation.as_deref().map(io::load_correlation).transpose()?;
            let mut plan = SimulationPlan::new(build_design(*id, correlation)?, methods, reps, seed);
            plan.validation_n = args.validation_n.unwrap_or(plan.validation_n);
            plan.folds = args.folds.unwrap_or(plan.folds);
            simulate_benchmark(&plan, &pool)?
        }
        (None, Some(path)) => {
            let ds = io::load_csv(path, args.label.as_deref().unwrap_or(DEFAULT_LABEL))?;
            let mut plan = RdcvPlan::new(methods, reps, seed);
            plan.outer_folds = args.outer.unwrap_or(plan.outer_folds);
            plan.inner_folds = args.inner.unwrap_or(plan.inner_folds);
            rdcv(&ds, &plan, &pool)?
        }
        (Some(_), Some(_)) => usage_error("give either '--design' or '--data', not both"),
        (None, None) => usage_error("one of '--design' or '--data' is required"),
    };
    let config = serde_json::to_value(&args)?;
    write_bench_outputs(&result, &out_dir, Provenance::new("bench", seed, pool.threads(), config))
}

/// Writes result files into `out_dir`. With failures a `FAILED` marker is
/// written first and an error returned.
pub fn write_bench_outputs(result: &BenchmarkResult, out_dir: &Path, provenance: Provenance) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let marker = out_dir.join(FAILED_MARKER);
    if !result.failures.is_empty() {
        io::save_with(&marker, |w| io::write_failures(&result.failures, w))?;
    } else if marker.exists() {
        std::fs::remove_file(&marker).with_context(|| format!("cannot remove stale {}", marker.display()))?;
    }
    io::save_with(&out_dir.join("benchmark.csv"), |w| io::write_benchmark(result, w))?;
    io::save_with(&out_dir.join("summary.csv"), |w| io::write_summary(&result.summary(), w))?;
    save_json(&provenance, &out_dir.join("provenance.json"))?;
    for s in result.summary() {
        println!("{}\tmean_auc={:.4}\tsd={:.4}\treps={}", s.method, s.mean_auc, s.sd_auc, s.repetitions);
    }
    if let Some(first) = result.failures.first() {
        bail!(
            "{} job(s) failed, first: {} repetition {}: {}; see {}",
            result.failures.len(),
            first.method,
            first.repetition,
            first.message,
            marker.display()
        );
    }
    Ok(())
}

/// Fits with the given parameters, or with those chosen by k-fold CV.
pub fn fit_or_tune(ds: &Dataset, method: Method, params: Option<&str>, seed: u64, folds: usize) -> Result<(Params, FittedModel)> {
    let options = MethodOptions::default();
    let params = match params {
        Some(text) => parse_params(method, text).map_err(anyhow::Error::msg)?,
        None => {
            let grid = ParamGrid::default_for(method, ds, ds.n_subjects().div_ceil(folds), &options)?;
            kfold_tune(ds, &grid, folds, &mut stream(seed, STREAM_FOLDS, 0), &options)?.chosen
        }
    };
    let model = fit_method(ds, method, &params, &options)?;
    Ok((params, model))
}

fn load_and_fit(args: &ModelArgs) -> Result<(Dataset, Method, Params, FittedModel)> {
    let path = required(args.data.clone(), "data");
    let method = required(args.method, "method");
    let ds = io::load_csv(&path, args.label.as_deref().unwrap_or(DEFAULT_LABEL))?;
    let (params, model) = fit_or_tune(&ds, method, args.params.as_deref(), args.seed.unwrap_or(1), args.folds.unwrap_or(6))?;
    log::info!("{method}: {params}");
    Ok((ds, method, params, model))
}

pub fn cmd_roc(args: RocArgs) -> Result<()> {
    let (ds, method, params, model) = load_and_fit(&args.model)?;
    let curve = roc_curve(&model.score_all(&ds), ds.labels())?;
    let out = args.out.unwrap_or_else(|| default_out_dir().join("roc.csv"));
    ensure_parent(&out)?;
    io::save_roc(&curve, &out)?;
    println!("{method}\t{params}\tauc={}", curve.auc);
    Ok(())
}

pub fn cmd_fit(args: FitArgs) -> Result<()> {
    let (ds, method, params, model) = load_and_fit(&args.model)?;
    let out = args.out.unwrap_or_else(|| default_out_dir().join("model.json"));
    ensure_parent(&out)?;
    ModelDocument::new(method, params.clone(), ds.names().to_vec(), model).save(&out)?;
    println!("{method}\t{params}");
    Ok(())
}

pub fn cmd_score(args: ScoreArgs) -> Result<()> {
    let doc = ModelDocument::load(&required(args.model, "model"))?;
    let data = required(args.data, "data");
    let ds = io::load_csv(&data, args.label.as_deref().unwrap_or(DEFAULT_LABEL))?;
    if ds.names() != doc.biomarkers.as_slice() {
        bail!(
            "{} has columns [{}] but the model expects [{}]",
            data.display(),
            ds.names().join(", "),
            doc.biomarkers.join(", ")
        );
    }
    let scores = doc.model.score_all(&ds);
    let out = args.out.unwrap_or_else(|| default_out_dir().join("scores.csv"));
    ensure_parent(&out)?;
    io::save_with(&out, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "score", DEFAULT_LABEL])?;
        for (i, (s, y)) in scores.iter().zip(ds.labels()).enumerate() {
            wtr.write_record([(i + 1).to_string(), s.to_string(), y.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    println!("auc={}", auc(&scores, ds.labels())?);
    Ok(())
}
