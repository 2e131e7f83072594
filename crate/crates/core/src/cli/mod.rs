//! The `kan-ecoc` command line: `synth | train | eval | sweep | ablate`.
//!
//! Failures print one line, `error[<code>]: <message>`, on stderr and exit
//! with 2 (usage or configuration), 3 (data, I/O) or 4 (numeric).
//! `KAN_ECOC_THREADS` caps the rayon pool used by `--parallel`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv_dataset, load_csv_dataset_with_classes, normalize_features, stratified_split, synth_blobs,
    write_csv_dataset, Normalizer,
};
use crate::ecoc::{default_code_length, generate_coding_matrix};
use crate::error::{Error, Result};
use crate::experiment::{
    dims_label, parse_dims, run_experiment, run_single, ExperimentKind, ExperimentSpec, Method, TrainedModel,
    RESULTS_FILE,
};
use crate::layers::{NetworkSpec, SplineGrid, Variant};
use crate::metrics::{evaluate, MetricsReport};
use crate::train::{config_hash, TrainConfig};

pub const THREADS_ENV: &str = "KAN_ECOC_THREADS";
pub const MODEL_DIR: &str = "model";
pub const NORMALIZER_FILE: &str = "normalizer.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Parser)]
#[command(name = "kan-ecoc", version, about = "Kolmogorov-Arnold networks with ECOC ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Synth(SynthArgs),
    /// Train one model on a stratified split and report held-out metrics.
    Train(TrainArgs),
    /// Evaluate a trained model directory on a CSV file.
    Eval(EvalArgs),
    /// Run a hyperparameter sweep from a TOML or JSON spec.
    Sweep(ExperimentArgs),
    /// Run a variant ablation from a TOML or JSON spec.
    Ablate(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 250)]
    pub per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub sep: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "ecoc")]
    pub method: Method,
    #[arg(long, default_value = "bspline")]
    pub variant: Variant,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Hidden widths, e.g. `5,5`.
    #[arg(long, default_value = "5,5")]
    pub dims: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// ECOC code length (default `2k`).
    #[arg(long)]
    pub code_length: Option<usize>,
    /// Drop the silu base path.
    #[arg(long)]
    pub no_base: bool,
    /// Train ECOC bit classifiers in parallel.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value = "kan-ecoc-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to the label column used in training.
    #[arg(long)]
    pub label_col: Option<String>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML (or `.json`) experiment spec.
    pub spec: PathBuf,
    #[arg(long, default_value = "kan-ecoc-results")]
    pub out: PathBuf,
    /// Run jobs in parallel; results are identical to a serial run.
    #[arg(long)]
    pub parallel: bool,
    /// Fill the `wall_time_s` column (makes reruns differ).
    #[arg(long)]
    pub wall_time: bool,
    /// Override the spec's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

/// What `train` records about itself, read back by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub method: Method,
    pub variant: Variant,
    pub grid: usize,
    pub order: usize,
    pub hidden_dims: Vec<usize>,
    pub use_base: bool,
    pub label_column: String,
    pub num_classes: usize,
    pub test_fraction: f64,
    pub train: TrainConfig,
}

/// Metrics JSON written by `train` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub method: Method,
    pub variant: Variant,
    pub grid: usize,
    pub order: usize,
    pub dims: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    dispatch(cli)
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let body: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect();
            eprintln!("error[usage]: {}", body.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), one_line(&e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_experiment(&a, ExperimentKind::Sweep),
        Command::Ablate(a) => cmd_experiment(&a, ExperimentKind::Ablate),
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let ds = synth_blobs(a.classes, a.per_class, a.dim, a.sep, a.seed)?;
    write_csv_dataset(&ds, &a.out, &a.label_col)?;
    println!(
        "n={} k={} dim={} -> {}",
        ds.len(),
        ds.num_classes,
        ds.dim(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let hidden_dims = parse_dims(&a.dims)?;
    let grid = SplineGrid::new(a.grid, a.order)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        seed: a.seed,
        parallel: a.parallel,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let mut net = NetworkSpec::new(hidden_dims.clone(), grid, a.variant);
    net.use_base = !a.no_base;

    let raw = load_csv_dataset(&a.data, &a.label_col)?;
    raw.require_all_classes()?;
    let k = raw.num_classes;
    let (train, test) = stratified_split(&raw, a.test_fraction, a.seed)?;
    let (train, norm) = normalize_features(&train)?;
    let test = norm.apply(&test)?;
    let coding = match a.method {
        Method::Ecoc => Some(generate_coding_matrix(
            k,
            a.code_length.unwrap_or_else(|| default_code_length(k)),
            a.seed,
        )?),
        Method::Vanilla => None,
    };

    let info = RunInfo {
        method: a.method,
        variant: a.variant,
        grid: a.grid,
        order: a.order,
        hidden_dims,
        use_base: net.use_base,
        label_column: a.label_col.clone(),
        num_classes: k,
        test_fraction: a.test_fraction,
        train: TrainConfig {
            parallel: false,
            ..cfg.clone()
        },
    };
    let hash = config_hash(&info)?;
    let run = run_single(a.method, &net, &train, &test, &cfg, coding.as_ref())?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    run.model.save(&a.out.join(MODEL_DIR), &hash)?;
    write_json(&a.out.join(NORMALIZER_FILE), &norm)?;
    write_json(&a.out.join(RUN_FILE), &info)?;
    let metrics = MetricsFile {
        method: a.method,
        variant: a.variant,
        grid: a.grid,
        order: a.order,
        dims: dims_label(&info.hidden_dims),
        seed: a.seed,
        config_hash: hash,
        final_loss: Some(run.final_loss),
        n_test: test.len(),
        metrics: run.report,
    };
    write_json(&a.out.join(METRICS_FILE), &metrics)?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let info: RunInfo = read_json(&a.model.join(RUN_FILE))?;
    let norm: Normalizer = read_json(&a.model.join(NORMALIZER_FILE))?;
    let model = TrainedModel::load(&a.model.join(MODEL_DIR))?;
    if model.method() != info.method || model.num_classes() != info.num_classes {
        return Err(Error::Data(format!("{} does not match its model files", RUN_FILE)));
    }
    let label = a.label_col.as_deref().unwrap_or(&info.label_column);
    let ds = load_csv_dataset_with_classes(&a.data, label, Some(info.num_classes))?;
    let features = norm.transform(&ds.features)?;
    let pred = model.predict(&features)?;
    let report = evaluate(&ds.labels, &pred, info.num_classes)?;
    let metrics = MetricsFile {
        method: info.method,
        variant: info.variant,
        grid: info.grid,
        order: info.order,
        dims: dims_label(&info.hidden_dims),
        seed: info.train.seed,
        config_hash: config_hash(&info)?,
        final_loss: None,
        n_test: ds.len(),
        metrics: report,
    };
    if let Some(out) = &a.out {
        write_json(out, &metrics)?;
    }
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

pub fn cmd_experiment(a: &ExperimentArgs, kind: ExperimentKind) -> Result<()> {
    let mut spec = ExperimentSpec::from_path(&a.spec)?;
    spec.parallel |= a.parallel;
    spec.record_wall_time |= a.wall_time;
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    spec.validate(kind)?;
    let quiet = a.quiet;
    let res = run_experiment(&spec, kind, Some(&a.out), |r| {
        if !quiet {
            let f1 = r
                .metrics
                .as_ref()
                .map(|m| format!("{:.4}", m.f1))
                .unwrap_or_else(|| "-".into());
            eprintln!(
                "{} {} g={} o={} dims={} seed={} f1={} {}",
                r.method,
                r.variant,
                r.grid,
                r.order,
                dims_label(&r.hidden_dims),
                r.seed,
                f1,
                r.status
            );
        }
    })?;
    println!(
        "{} runs ({} failed), {} summaries -> {}",
        res.runs.len(),
        res.failed_runs(),
        res.summaries.len(),
        a.out.join(RESULTS_FILE).display()
    );
    Ok(())
}
