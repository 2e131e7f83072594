//! Single runs, hyperparameter sweeps and variant ablations.
//!
//! An experiment is the cross product of variants, grid sizes, spline orders
//! and hidden-layer shapes ("cells"), crossed with methods and seeds. Each
//! seed gets its own stratified split, normalizer and coding matrix; every
//! cell and method trained under that seed shares them.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/results.csv
//! <out>/coding_matrix_seed<s>.json
//! <out>/runs/<method>_<variant>_g<g>_o<s>_d<dims>_seed<s>.json
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv_dataset, normalize_features, stratified_split, synth_blobs, Dataset};
use crate::ecoc::{default_code_length, generate_coding_matrix, CodingMatrix};
use crate::error::{Error, Result};
use crate::grad_engine::Matrix;
use crate::layers::{load_network, save_network, KanNetwork, NetworkSpec, SplineGrid, Variant};
use crate::metrics::{aggregate_seeds, evaluate, MetricValues, MetricsReport, SeedSummary};
use crate::train::{
    config_hash, load_ensemble, predict_ecoc, predict_vanilla, save_ensemble, train_ecoc, train_vanilla, EcocEnsemble,
    TrainConfig,
};

pub const RESULTS_FILE: &str = "results.csv";
pub const RUNS_DIR: &str = "runs";
pub const MODEL_FILE: &str = "model.json";

/// Columns of the results table, in order.
pub const CSV_COLUMNS: [&str; 16] = [
    "method",
    "variant",
    "grid",
    "order",
    "dims",
    "seed",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "wall_time_s",
    "accuracy_std",
    "precision_std",
    "recall_std",
    "f1_std",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Ecoc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Ecoc => "ecoc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Method::Vanilla),
            "ecoc" => Ok(Method::Ecoc),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Which subcommand an experiment spec is run under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// One variant; grid sizes x orders x hidden shapes.
    Sweep,
    /// Variant axis added.
    Ablate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    #[serde(default = "one")]
    pub seed: u64,
}

fn one() -> u64 {
    1
}

/// Either a CSV file or synthetic blob parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthParams>,
}

fn default_label() -> String {
    "label".into()
}

impl DataSource {
    pub fn synth(params: SynthParams) -> Self {
        DataSource {
            path: None,
            label_column: default_label(),
            synth: Some(params),
        }
    }

    pub fn csv(path: impl Into<PathBuf>, label_column: &str) -> Self {
        DataSource {
            path: Some(path.into()),
            label_column: label_column.into(),
            synth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.path, &self.synth) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::Config("data needs exactly one of `path` or `synth`".into())),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        self.validate()?;
        match (&self.path, &self.synth) {
            (Some(p), _) => load_csv_dataset(p, &self.label_column),
            (_, Some(s)) => synth_blobs(s.classes, s.per_class, s.dim, s.separation, s.seed),
            _ => unreachable!("validated above"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// A sweep or ablation definition, read from TOML or JSON.
///
/// ```toml
/// grid_sizes = [3, 5, 10]
/// spline_orders = [1, 2, 3]
/// hidden_dims = [[5], [5, 5], [5, 5, 5]]
/// seeds = [0, 1, 2, 3, 4, 5]
///
/// [train]
/// epochs = 100
///
/// [data.synth]
/// classes = 8
/// per_class = 250
/// dim = 16
/// separation = 4.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Defaults to both methods.
    #[serde(default, alias = "method", deserialize_with = "one_or_many")]
    pub methods: Option<Vec<Method>>,
    /// Defaults to `bspline` for sweeps and all three families for ablations.
    #[serde(default, alias = "variant", deserialize_with = "one_or_many")]
    pub variants: Option<Vec<Variant>>,
    pub grid_sizes: Vec<usize>,
    #[serde(default = "default_orders")]
    pub spline_orders: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<Vec<usize>>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "yes")]
    pub use_base: bool,
    /// ECOC code length; `2k` when absent.
    #[serde(default)]
    pub code_length: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataSource,
    /// Run (cell, method, seed) jobs on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
    /// Fill the `wall_time_s` column. Off by default so reruns are
    /// byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_orders() -> Vec<usize> {
    vec![3]
}

fn default_hidden() -> Vec<Vec<usize>> {
    vec![vec![5, 5]]
}

fn default_test_fraction() -> f64 {
    0.2
}

fn yes() -> bool {
    true
}

/// One hyperparameter combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub variant: Variant,
    pub grid: usize,
    pub order: usize,
    pub hidden_dims: Vec<usize>,
}

impl Cell {
    /// `5,5` style label used in the CSV `dims` column.
    pub fn dims_label(&self) -> String {
        dims_label(&self.hidden_dims)
    }

    pub fn network_spec(&self, use_base: bool) -> Result<NetworkSpec> {
        let mut spec = NetworkSpec::new(
            self.hidden_dims.clone(),
            SplineGrid::new(self.grid, self.order)?,
            self.variant,
        );
        spec.use_base = use_base;
        Ok(spec)
    }
}

pub fn dims_label(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses `5,5` (spaces and brackets tolerated); an empty string means no
/// hidden layer.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|p| {
            let d: usize = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad hidden dims '{s}'")))?;
            if d == 0 {
                return Err(Error::Config(format!("hidden width must be positive in '{s}'")));
            }
            Ok(d)
        })
        .collect()
}

impl ExperimentSpec {
    /// TOML unless the file ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {}", e.message())))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods
            .clone()
            .unwrap_or_else(|| vec![Method::Vanilla, Method::Ecoc])
    }

    pub fn variants(&self, kind: ExperimentKind) -> Vec<Variant> {
        self.variants.clone().unwrap_or_else(|| match kind {
            ExperimentKind::Sweep => vec![Variant::BSpline],
            ExperimentKind::Ablate => vec![Variant::BSpline, Variant::Rbf, Variant::Rswaf],
        })
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let nonempty = |len: usize, what: &str| {
            if len == 0 {
                Err(Error::Config(format!("`{what}` must not be empty")))
            } else {
                Ok(())
            }
        };
        let methods = self.methods();
        let variants = self.variants(kind);
        nonempty(methods.len(), "methods")?;
        nonempty(variants.len(), "variants")?;
        nonempty(self.grid_sizes.len(), "grid_sizes")?;
        nonempty(self.spline_orders.len(), "spline_orders")?;
        nonempty(self.hidden_dims.len(), "hidden_dims")?;
        nonempty(self.seeds.len(), "seeds")?;
        if kind == ExperimentKind::Sweep && variants.len() != 1 {
            return Err(Error::Config(
                "a sweep takes a single variant; use ablate for several".into(),
            ));
        }
        let distinct = |n: usize, unique: usize, what: &str| {
            if n != unique {
                Err(Error::Config(format!("`{what}` contains duplicates")))
            } else {
                Ok(())
            }
        };
        distinct(
            self.seeds.len(),
            self.seeds.iter().collect::<BTreeSet<_>>().len(),
            "seeds",
        )?;
        distinct(methods.len(), methods.iter().collect::<BTreeSet<_>>().len(), "methods")?;
        distinct(
            variants.len(),
            variants.iter().collect::<BTreeSet<_>>().len(),
            "variants",
        )?;
        for &g in &self.grid_sizes {
            for &s in &self.spline_orders {
                SplineGrid::new(g, s)?;
            }
        }
        for dims in &self.hidden_dims {
            if dims.contains(&0) {
                return Err(Error::Config(format!("hidden width must be positive in {dims:?}")));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.train.validate()?;
        self.data.validate()
    }

    /// Cells in output order: variant, then grid, order, hidden shape.
    pub fn cells(&self, kind: ExperimentKind) -> Vec<Cell> {
        let mut out = Vec::new();
        for variant in self.variants(kind) {
            for &grid in &self.grid_sizes {
                for &order in &self.spline_orders {
                    for dims in &self.hidden_dims {
                        out.push(Cell {
                            variant,
                            grid,
                            order,
                            hidden_dims: dims.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Everything that determines one run's numbers, hashed into its record.
#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    method: Method,
    cell: &'a Cell,
    seed: u64,
    use_base: bool,
    test_fraction: f64,
    code_length: Option<usize>,
    train: &'a TrainConfig,
    data: &'a DataSource,
}

/// A trained vanilla network or ECOC ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Vanilla(KanNetwork),
    Ecoc(EcocEnsemble),
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        match self {
            TrainedModel::Vanilla(_) => Method::Vanilla,
            TrainedModel::Ecoc(_) => Method::Ecoc,
        }
    }

    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Vanilla(n) => predict_vanilla(n, inputs),
            TrainedModel::Ecoc(e) => predict_ecoc(e, inputs),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            TrainedModel::Vanilla(n) => n.output_dim(),
            TrainedModel::Ecoc(e) => e.coding_matrix().num_classes(),
        }
    }

    /// Vanilla models go to `<dir>/model.json`; ensembles use the ensemble
    /// directory layout.
    pub fn save(&self, dir: &Path, config_hash: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        match self {
            TrainedModel::Vanilla(n) => save_network(n, &dir.join(MODEL_FILE)),
            TrainedModel::Ecoc(e) => save_ensemble(e, dir, config_hash),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        if dir.join(MODEL_FILE).exists() {
            Ok(TrainedModel::Vanilla(load_network(&dir.join(MODEL_FILE))?))
        } else {
            Ok(TrainedModel::Ecoc(load_ensemble(dir)?.0))
        }
    }
}

/// Result of [`run_single`].
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub model: TrainedModel,
    pub report: MetricsReport,
    /// Mean training loss of the last epoch; averaged over bits for ECOC.
    pub final_loss: f64,
}

/// Trains one model on `train` and evaluates it on `test`. ECOC runs use
/// `coding` when given, else a `2k`-bit matrix drawn from `cfg.seed`.
pub fn run_single(
    method: Method,
    net: &NetworkSpec,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    coding: Option<&CodingMatrix>,
) -> Result<SingleRun> {
    let k = train.num_classes;
    let (model, final_loss) = match method {
        Method::Vanilla => {
            let init = net.build(train.dim(), k, cfg.seed)?;
            let (n, history) = train_vanilla(init, train, cfg)?;
            (TrainedModel::Vanilla(n), history.last().copied().unwrap_or(f64::NAN))
        }
        Method::Ecoc => {
            let generated;
            let m = match coding {
                Some(m) => m,
                None => {
                    generated = generate_coding_matrix(k, default_code_length(k), cfg.seed)?;
                    &generated
                }
            };
            let (e, histories) = train_ecoc(train, cfg, m, net)?;
            let last: f64 = histories.iter().filter_map(|h| h.last()).sum::<f64>() / histories.len() as f64;
            (TrainedModel::Ecoc(e), last)
        }
    };
    let pred = model.predict(&test.features)?;
    let report = evaluate(&test.labels, &pred, test.num_classes)?;
    Ok(SingleRun {
        model,
        report,
        final_loss,
    })
}

/// Outcome of one (cell, method, seed) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub variant: Variant,
    pub grid: usize,
    pub order: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    pub config_hash: String,
    /// `ok`, or `failed:<error code>`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coding_matrix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_some()
    }

    pub fn cell(&self) -> Cell {
        Cell {
            variant: self.variant,
            grid: self.grid,
            order: self.order,
            hidden_dims: self.hidden_dims.clone(),
        }
    }

    pub fn values(&self) -> Option<MetricValues> {
        self.metrics.as_ref().map(MetricValues::from)
    }

    /// File name under `runs/`.
    pub fn file_name(&self) -> String {
        let dims = if self.hidden_dims.is_empty() {
            "none".to_string()
        } else {
            self.hidden_dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("-")
        };
        format!(
            "{}_{}_g{}_o{}_d{}_seed{}.json",
            self.method, self.variant, self.grid, self.order, dims, self.seed
        )
    }
}

/// Mean and std across the seeds of one (cell, method).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub method: Method,
    pub cell: Cell,
    pub ok_runs: usize,
    pub total_runs: usize,
    /// `None` when fewer than two runs succeeded.
    pub summary: Option<SeedSummary>,
    pub mean_wall_time_s: Option<f64>,
}

impl SummaryRecord {
    /// `ok`, `partial` (some seeds failed) or `insufficient` (< 2 succeeded).
    pub fn status(&self) -> &'static str {
        match (&self.summary, self.ok_runs == self.total_runs) {
            (None, _) => "insufficient",
            (Some(_), true) => "ok",
            (Some(_), false) => "partial",
        }
    }
}

/// All records of an experiment, in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<SummaryRecord>,
}

impl ExperimentResults {
    pub fn summary_for(&self, method: Method, cell: &Cell) -> Option<&SummaryRecord> {
        self.summaries.iter().find(|s| s.method == method && &s.cell == cell)
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| !r.is_ok()).count()
    }

    /// Result rows, each (cell, method) group followed by its summary row.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut runs = self.runs.iter().peekable();
        for s in &self.summaries {
            while let Some(r) = runs.next_if(|r| r.method == s.method && r.cell() == s.cell) {
                let v = r.values();
                w.write_record([
                    r.method.to_string(),
                    r.variant.to_string(),
                    r.grid.to_string(),
                    r.order.to_string(),
                    dims_label(&r.hidden_dims),
                    r.seed.to_string(),
                    fmt(v.map(|v| v.accuracy)),
                    fmt(v.map(|v| v.precision)),
                    fmt(v.map(|v| v.recall)),
                    fmt(v.map(|v| v.f1)),
                    fmt(r.wall_time_s),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    r.status.clone(),
                ])
                .map_err(csv_err)?;
            }
            let mean = s.summary.map(|x| x.mean);
            let std = s.summary.map(|x| x.std);
            w.write_record([
                s.method.to_string(),
                s.cell.variant.to_string(),
                s.cell.grid.to_string(),
                s.cell.order.to_string(),
                s.cell.dims_label(),
                "summary".to_string(),
                fmt(mean.map(|v| v.accuracy)),
                fmt(mean.map(|v| v.precision)),
                fmt(mean.map(|v| v.recall)),
                fmt(mean.map(|v| v.f1)),
                fmt(s.mean_wall_time_s),
                fmt(std.map(|v| v.accuracy)),
                fmt(std.map(|v| v.precision)),
                fmt(std.map(|v| v.recall)),
                fmt(std.map(|v| v.f1)),
                s.status().to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Writes `results.csv` and one JSON record per run under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let runs_dir = dir.join(RUNS_DIR);
        fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
        for r in &self.runs {
            let path = runs_dir.join(r.file_name());
            fs::write(&path, serde_json::to_string_pretty(r)?).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(RESULTS_FILE);
        fs::write(&path, self.to_csv_string()?).map_err(|e| Error::io(&path, e))
    }
}

struct SeedContext {
    train: Dataset,
    test: Dataset,
    coding: Option<CodingMatrix>,
}

pub fn coding_matrix_file(seed: u64) -> String {
    format!("coding_matrix_seed{seed}.json")
}

/// Runs every (cell, method, seed) job. Spec errors, data loading and coding
/// matrix generation fail the whole experiment before any training; errors
/// inside a job are recorded on its row and the rest continue. When `out` is
/// given the coding matrices, per-run JSON and `results.csv` are written
/// there. `progress` sees each record as it finishes.
pub fn run_experiment<F>(
    spec: &ExperimentSpec,
    kind: ExperimentKind,
    out: Option<&Path>,
    progress: F,
) -> Result<ExperimentResults>
where
    F: Fn(&RunRecord) + Sync,
{
    spec.validate(kind)?;
    let raw = spec.data.load()?;
    raw.require_all_classes()?;
    let k = raw.num_classes;
    let methods = spec.methods();
    let uses_ecoc = methods.contains(&Method::Ecoc);
    let b = spec.code_length.unwrap_or_else(|| default_code_length(k));
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut contexts = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let (train, test) = stratified_split(&raw, spec.test_fraction, seed)?;
        let (train, norm) = normalize_features(&train)?;
        let test = norm.apply(&test)?;
        let coding = if uses_ecoc {
            let m = generate_coding_matrix(k, b, seed)?;
            if let Some(dir) = out {
                m.save(&dir.join(coding_matrix_file(seed)))?;
            }
            Some(m)
        } else {
            None
        };
        contexts.push(SeedContext { train, test, coding });
    }

    let cells = spec.cells(kind);
    let mut jobs = Vec::with_capacity(cells.len() * methods.len() * spec.seeds.len());
    for cell in &cells {
        for &method in &methods {
            for seed_idx in 0..spec.seeds.len() {
                jobs.push((cell, method, seed_idx));
            }
        }
    }

    let run = |&(cell, method, seed_idx): &(&Cell, Method, usize)| {
        let r = run_job(spec, cell, method, spec.seeds[seed_idx], &contexts[seed_idx]);
        progress(&r);
        r
    };
    let runs: Vec<RunRecord> = if spec.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };

    let mut summaries = Vec::with_capacity(cells.len() * methods.len());
    for (group, chunk) in runs.chunks(spec.seeds.len()).enumerate() {
        let cell = cells[group / methods.len()].clone();
        let method = methods[group % methods.len()];
        let ok: Vec<MetricValues> = chunk.iter().filter_map(RunRecord::values).collect();
        let summary = if ok.len() >= 2 {
            Some(aggregate_seeds(&ok)?)
        } else {
            None
        };
        let times: Vec<f64> = chunk.iter().filter_map(|r| r.wall_time_s).collect();
        let mean_wall_time_s = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        summaries.push(SummaryRecord {
            method,
            cell,
            ok_runs: ok.len(),
            total_runs: chunk.len(),
            summary,
            mean_wall_time_s,
        });
    }

    let results = ExperimentResults { runs, summaries };
    if let Some(dir) = out {
        results.write_dir(dir)?;
    }
    Ok(results)
}

fn run_job(spec: &ExperimentSpec, cell: &Cell, method: Method, seed: u64, ctx: &SeedContext) -> RunRecord {
    let cfg = TrainConfig {
        seed,
        ..spec.train.clone()
    };
    // the parallel flag never changes results, so it stays out of the hash
    let hashed_cfg = TrainConfig {
        parallel: false,
        ..cfg.clone()
    };
    let hash = config_hash(&RunConfig {
        method,
        cell,
        seed,
        use_base: spec.use_base,
        test_fraction: spec.test_fraction,
        code_length: spec.code_length,
        train: &hashed_cfg,
        data: &spec.data,
    })
    .unwrap_or_default();

    let start = Instant::now();
    let outcome = cell
        .network_spec(spec.use_base)
        .and_then(|net| run_single(method, &net, &ctx.train, &ctx.test, &cfg, ctx.coding.as_ref()));
    let elapsed = start.elapsed().as_secs_f64();

    let (status, error, metrics) = match outcome {
        Ok(r) => ("ok".to_string(), None, Some(r.report)),
        Err(e) => (format!("failed:{}", e.code()), Some(e.to_string()), None),
    };
    RunRecord {
        method,
        variant: cell.variant,
        grid: cell.grid,
        order: cell.order,
        hidden_dims: cell.hidden_dims.clone(),
        seed,
        config_hash: hash,
        status,
        error,
        metrics,
        coding_matrix: (method == Method::Ecoc).then(|| coding_matrix_file(seed)),
        wall_time_s: spec.record_wall_time.then_some(elapsed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec::from_toml_str(
            r#"
            grid_sizes = [3]
            spline_orders = [1, 2]
            hidden_dims = [[2]]
            seeds = [0, 1]

            [train]
            epochs = 2
            batch_size = 16

            [data.synth]
            classes = 3
            per_class = 20
            dim = 2
            separation = 3.0
            "#,
        )
        .unwrap()
    }

    #[test]
    fn toml_defaults() {
        let s = tiny_spec();
        assert_eq!(s.methods(), vec![Method::Vanilla, Method::Ecoc]);
        assert_eq!(s.variants(ExperimentKind::Sweep), vec![Variant::BSpline]);
        assert_eq!(s.variants(ExperimentKind::Ablate).len(), 3);
        assert_eq!(s.train.learning_rate, 1e-3);
        assert_eq!(s.test_fraction, 0.2);
        assert_eq!(s.cells(ExperimentKind::Sweep).len(), 2);
    }

    #[test]
    fn single_values_accepted_for_lists() {
        let s = ExperimentSpec::from_json_str(
            r#"{"method": "ecoc", "variant": "rbf", "grid_sizes": [5], "seeds": [3],
                "data": {"path": "x.csv"}}"#,
        )
        .unwrap();
        assert_eq!(s.methods(), vec![Method::Ecoc]);
        assert_eq!(s.variants(ExperimentKind::Sweep), vec![Variant::Rbf]);
        assert_eq!(s.hidden_dims, vec![vec![5, 5]]);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = tiny_spec();
        s.seeds = vec![1, 1];
        assert!(matches!(s.validate(ExperimentKind::Sweep), Err(Error::Config(_))));
        let mut s = tiny_spec();
        s.grid_sizes = vec![0];
        assert!(s.validate(ExperimentKind::Sweep).is_err());
        let mut s = tiny_spec();
        s.variants = Some(vec![Variant::Rbf, Variant::Rswaf]);
        assert!(s.validate(ExperimentKind::Sweep).is_err());
        assert!(s.validate(ExperimentKind::Ablate).is_ok());
        assert!(ExperimentSpec::from_toml_str("grid_sizes = [3]\nseeds = [0]\nbogus = 1\n[data]\npath='a'").is_err());
        assert!(
            ExperimentSpec::from_json_str(r#"{"variant": "spline", "grid_sizes": [3], "seeds": [0], "data": {}}"#)
                .is_err()
        );
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("5,5").unwrap(), vec![5, 5]);
        assert_eq!(parse_dims("[5, 5, 5]").unwrap(), vec![5, 5, 5]);
        assert_eq!(parse_dims("").unwrap(), Vec::<usize>::new());
        assert!(parse_dims("5,x").is_err());
        assert!(parse_dims("0").is_err());
    }

    #[test]
    fn experiment_rows_and_summaries() {
        let spec = tiny_spec();
        let res = run_experiment(&spec, ExperimentKind::Sweep, None, |_| {}).unwrap();
        // 2 cells x 2 methods x 2 seeds
        assert_eq!(res.runs.len(), 8);
        assert_eq!(res.summaries.len(), 4);
        assert_eq!(res.failed_runs(), 0);
        let csv = res.to_csv_string().unwrap();
        assert_eq!(csv.lines().count(), 1 + 8 + 4);
        assert!(csv.starts_with("method,variant,grid,order,dims,seed,accuracy,precision,recall,f1,wall_time_s"));
        assert_eq!(csv.lines().filter(|l| l.contains(",summary,")).count(), 4);
        for s in &res.summaries {
            assert_eq!(s.status(), "ok");
        }
    }

    #[test]
    fn failed_jobs_are_recorded_not_fatal() {
        let mut spec = tiny_spec();
        spec.train.learning_rate = 1e300;
        spec.methods = Some(vec![Method::Vanilla]);
        spec.spline_orders = vec![1];
        let res = run_experiment(&spec, ExperimentKind::Sweep, None, |_| {}).unwrap();
        assert_eq!(res.runs.len(), 2);
        assert_eq!(res.failed_runs(), 2);
        assert_eq!(res.summaries[0].status(), "insufficient");
        for r in &res.runs {
            if !r.is_ok() {
                assert!(r.status.starts_with("failed:"));
                assert!(r.error.is_some());
            }
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let spec = tiny_spec();
        let a = run_experiment(&spec, ExperimentKind::Sweep, None, |_| {}).unwrap();
        let par = ExperimentSpec { parallel: true, ..spec };
        let b = run_experiment(&par, ExperimentKind::Sweep, None, |_| {}).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        assert_eq!(a.runs, b.runs);
    }

    #[test]
    fn model_save_load() {
        let ds = synth_blobs(3, 20, 2, 3.0, 0).unwrap();
        let (train, test) = stratified_split(&ds, 0.25, 0).unwrap();
        let net = NetworkSpec::new(vec![2], SplineGrid::new(3, 1).unwrap(), Variant::Rbf);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        for method in [Method::Vanilla, Method::Ecoc] {
            let run = run_single(method, &net, &train, &test, &cfg, None).unwrap();
            let dir = tempfile::tempdir().unwrap();
            run.model.save(dir.path(), "h").unwrap();
            let back = TrainedModel::load(dir.path()).unwrap();
            assert_eq!(back, run.model);
            assert_eq!(back.method(), method);
        }
    }
}
