//! Experiment grids over methods, confidence thresholds and label budgets,
//! repeated over seeds, with per-grid-point mean and sample standard
//! deviation and a fixed CSV layout.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, Split};
use crate::model::{self, TrainConfig};
use crate::nn::{mix_seed, Rng};
use crate::safe_gcn::{self, ExpansionLog, SafeGcnConfig};
use crate::NodeSubset;

pub const CSV_HEADER: [&str; 9] = [
    "dataset",
    "method",
    "alpha",
    "labels_per_class",
    "seed",
    "accuracy",
    "iterations",
    "pool_size",
    "wall_time_s",
];

/// Marker in the `seed` column of aggregate rows; their `accuracy` field
/// reads `<mean>+-<std>`.
pub const AGGREGATE_MARKER: &str = "mean+-std";

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_LABELS_PER_CLASS: usize = 20;
pub const DEFAULT_TEST_SIZE: usize = 1000;

/// Seed stream used to draw random splits, kept apart from model seeds.
const SPLIT_STREAM: u64 = 0x5EED_5917;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty experiment grid: {0}")]
    EmptyGrid(String),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sgcn")]
    Sgcn,
    #[serde(rename = "gcn")]
    Gcn,
    #[serde(rename = "safegcn")]
    SafeGcn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sgcn => "sgcn",
            Method::Gcn => "gcn",
            Method::SafeGcn => "safegcn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sgcn" => Ok(Method::Sgcn),
            "gcn" => Ok(Method::Gcn),
            "safegcn" => Ok(Method::SafeGcn),
            _ => Err(format!(
                "unknown method {s:?} (expected sgcn, gcn or safegcn)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSource {
    /// A `split.json` reproducing a fixed division.
    Fixed(PathBuf),
    /// A fresh split per seed with `labels_per_class` labels per class.
    Random { test_size: usize },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    pub methods: Vec<Method>,
    /// Threshold grid for `safegcn`; `None` means [`DEFAULT_ALPHA`].
    pub alphas: Option<Vec<f64>>,
    /// Label-budget grid for random splits; `None` means [`DEFAULT_LABELS_PER_CLASS`].
    pub labels_per_class: Option<Vec<usize>>,
    pub split: SplitSource,
    /// Seed field is ignored; each run uses its own seed.
    pub train: TrainConfig,
    pub max_iterations: usize,
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn new(dataset: impl Into<PathBuf>, methods: Vec<Method>, seeds: Vec<u64>) -> Self {
        Self {
            dataset: dataset.into(),
            methods,
            alphas: None,
            labels_per_class: None,
            split: SplitSource::Random {
                test_size: DEFAULT_TEST_SIZE,
            },
            train: TrainConfig::default(),
            max_iterations: SafeGcnConfig::default().max_iterations,
            seeds,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::EmptyGrid("no seeds".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::EmptyGrid("no methods".into()));
        }
        if let Some(alphas) = &self.alphas {
            if !self.methods.contains(&Method::SafeGcn) {
                return Err(HarnessError::InvalidSpec(
                    "alpha only applies to the safegcn method".into(),
                ));
            }
            if alphas.is_empty() {
                return Err(HarnessError::EmptyGrid("no alpha values".into()));
            }
            if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
                return Err(HarnessError::InvalidSpec(format!(
                    "alpha {a} is not positive"
                )));
            }
        }
        if let Some(counts) = &self.labels_per_class {
            if counts.is_empty() {
                return Err(HarnessError::EmptyGrid("no label counts".into()));
            }
            if matches!(self.split, SplitSource::Fixed(_)) {
                return Err(HarnessError::InvalidSpec(
                    "labels per class cannot be varied with a fixed split file".into(),
                ));
            }
        }
        if let SplitSource::Random { test_size: 0 } = self.split {
            return Err(HarnessError::InvalidSpec(
                "test size must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(HarnessError::InvalidSpec(
                "max iterations must be positive".into(),
            ));
        }
        self.train
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }

    /// Grid points sorted by label budget, method, then alpha.
    pub fn grid(&self) -> Vec<GridPoint> {
        let counts: Vec<Option<usize>> = match self.split {
            SplitSource::Fixed(_) => vec![None],
            SplitSource::Random { .. } => self
                .labels_per_class
                .clone()
                .unwrap_or_else(|| vec![DEFAULT_LABELS_PER_CLASS])
                .into_iter()
                .map(Some)
                .collect(),
        };
        let alphas = self.alphas.clone().unwrap_or_else(|| vec![DEFAULT_ALPHA]);
        let mut points = Vec::new();
        for &labels_per_class in &counts {
            for &method in &self.methods {
                let method_alphas: Vec<Option<f64>> = if method == Method::SafeGcn {
                    alphas.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for alpha in method_alphas {
                    points.push(GridPoint {
                        method,
                        alpha,
                        labels_per_class,
                    });
                }
            }
        }
        points.sort_by(|a, b| {
            a.labels_per_class
                .cmp(&b.labels_per_class)
                .then(a.method.cmp(&b.method))
                .then(a.alpha.unwrap_or(0.0).total_cmp(&b.alpha.unwrap_or(0.0)))
        });
        points.dedup();
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub method: Method,
    pub alpha: Option<f64>,
    /// `None` for fixed splits.
    pub labels_per_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accuracy: f64,
    /// Expansion iterations, `safegcn` only.
    pub iterations: Option<usize>,
    pub pool_size: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub dataset: String,
    pub grid: GridPoint,
    pub seed: u64,
    pub outcome: Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub grid: GridPoint,
    /// Successful runs contributing to the statistics.
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); `None` below two runs.
    pub std: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dataset: String,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    /// Expansion logs of the `safegcn` rows, parallel to those rows.
    pub logs: Vec<(GridPoint, u64, ExpansionLog)>,
}

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.outcome.is_err())
    }

    pub fn aggregate(&self, grid: &GridPoint) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.grid == *grid)
    }

    /// Writes rows and aggregates. With `timing == false` the wall-time
    /// column is left empty so that repeated runs are byte-identical.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<(), HarnessError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(CSV_HEADER)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for aggregate in &self.aggregates {
            let grid = aggregate.grid;
            let alpha = opt(grid.alpha.map(|a| a.to_string()));
            let lpc = opt(grid.labels_per_class.map(|n| n.to_string()));
            for row in self.rows.iter().filter(|r| r.grid == grid) {
                let seed = row.seed.to_string();
                let fields: [String; 9] = match &row.outcome {
                    Ok(m) => [
                        row.dataset.clone(),
                        grid.method.to_string(),
                        alpha.clone(),
                        lpc.clone(),
                        seed,
                        m.accuracy.to_string(),
                        opt(m.iterations.map(|n| n.to_string())),
                        m.pool_size.to_string(),
                        if timing {
                            format!("{:.3}", m.wall_time_s)
                        } else {
                            String::new()
                        },
                    ],
                    Err(_) => [
                        row.dataset.clone(),
                        grid.method.to_string(),
                        alpha.clone(),
                        lpc.clone(),
                        seed,
                        "error".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                };
                writer.write_record(&fields)?;
            }
            let summary = if aggregate.runs == 0 {
                "error".to_string()
            } else {
                format!(
                    "{}+-{}",
                    aggregate.mean,
                    opt(aggregate.std.map(|s| s.to_string()))
                )
            };
            writer.write_record([
                self.dataset.as_str(),
                grid.method.name(),
                &alpha,
                &lpc,
                AGGREGATE_MARKER,
                &summary,
                "",
                "",
                "",
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// One JSON line per expansion iteration of every `safegcn` run.
    pub fn write_expansion_logs<W: Write>(&self, mut out: W) -> Result<(), HarnessError> {
        for (grid, seed, log) in &self.logs {
            let mut context = serde_json::Map::new();
            context.insert("dataset".into(), self.dataset.clone().into());
            context.insert("seed".into(), (*seed).into());
            context.insert(
                "labels_per_class".into(),
                grid.labels_per_class
                    .map_or(serde_json::Value::Null, Into::into),
            );
            log.write_jsonl(&mut out, &context)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Mean and sample standard deviation; `None` for the std below two values.
pub fn mean_and_std(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    Some((mean, std))
}

struct RunOutput {
    metrics: RunMetrics,
    log: Option<ExpansionLog>,
}

fn split_for(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    fixed: Option<&Split>,
    grid: &GridPoint,
    seed: u64,
) -> Result<Split, String> {
    match (&spec.split, fixed) {
        (SplitSource::Fixed(_), Some(split)) => Ok(split.clone()),
        (SplitSource::Random { test_size }, _) => {
            let per_class = grid.labels_per_class.unwrap_or(DEFAULT_LABELS_PER_CLASS);
            let mut rng = Rng::new(mix_seed(seed, SPLIT_STREAM));
            dataset::make_split(dataset, per_class, *test_size, &mut rng).map_err(|e| e.to_string())
        }
        (SplitSource::Fixed(_), None) => unreachable!("fixed split is loaded up front"),
    }
}

/// Trains and evaluates one method on one split. Test nodes never enter
/// training; they are attached to the graph only at prediction time.
pub fn evaluate_method(
    dataset: &Dataset,
    split: &Split,
    method: Method,
    alpha: Option<f64>,
    max_iterations: usize,
    cfg: &TrainConfig,
) -> Result<(RunMetrics, Option<ExpansionLog>), String> {
    let start = Instant::now();
    let labels = dataset.labels();
    let classes = dataset.num_classes();
    let seeds: Vec<(usize, usize)> = split
        .train_labeled()
        .iter()
        .map(|&n| (n, labels[n]))
        .collect();
    let err = |e: &dyn std::error::Error| e.to_string();

    let (preds, iterations, pool_size, log) = match method {
        Method::Sgcn => {
            let params =
                model::train_sgcn(dataset.features(), dataset.graph(), &seeds, classes, cfg)
                    .map_err(|e| err(&e))?;
            let preds = safe_gcn::predict_with_context(
                &params,
                dataset,
                split.train_labeled(),
                split.test(),
            )
            .map_err(|e| err(&e))?;
            (preds, None, seeds.len(), None)
        }
        Method::Gcn => {
            let train_nodes = split.train_nodes();
            let subset =
                NodeSubset::new(train_nodes.clone(), dataset.num_nodes()).map_err(|e| err(&e))?;
            let propagator = dataset
                .graph()
                .induced_subgraph(&subset)
                .map_err(|e| err(&e))?
                .normalize();
            let x = dataset.features().select_rows(subset.nodes());
            let local_labels: Vec<usize> = subset.nodes().iter().map(|&n| labels[n]).collect();
            let mask: Vec<usize> = split
                .train_labeled()
                .iter()
                .filter_map(|&n| subset.local_index(n))
                .collect();
            let params = model::train(&x, &propagator, &local_labels, &mask, classes, cfg)
                .map_err(|e| err(&e))?;
            let preds =
                safe_gcn::predict_with_context(&params, dataset, &train_nodes, split.test())
                    .map_err(|e| err(&e))?;
            (preds, None, seeds.len(), None)
        }
        Method::SafeGcn => {
            let config = SafeGcnConfig {
                alpha: alpha.unwrap_or(DEFAULT_ALPHA),
                max_iterations,
                train: *cfg,
            };
            let outcome = safe_gcn::run(dataset, split, &config).map_err(|e| err(&e))?;
            let preds =
                safe_gcn::final_predict(&outcome.params, dataset, &outcome.pool, split.test())
                    .map_err(|e| err(&e))?;
            let iterations = outcome.log.iterations();
            (
                preds,
                Some(iterations),
                outcome.pool.len(),
                Some(outcome.log),
            )
        }
    };
    let metrics = RunMetrics {
        accuracy: safe_gcn::accuracy(&preds, split.test(), labels),
        iterations,
        pool_size,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((metrics, log))
}

/// Runs every (grid point × seed) pair. Individual failures become error
/// rows; only an unusable spec or dataset aborts the whole experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let dataset = dataset::load(&spec.dataset)?;
    run_experiment_on(spec, &dataset)
}

/// Like [`run_experiment`] with an already loaded dataset; `spec.dataset`
/// is only consulted for a fixed split path.
pub fn run_experiment_on(
    spec: &ExperimentSpec,
    dataset: &Dataset,
) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let fixed = match &spec.split {
        SplitSource::Fixed(path) => Some(dataset::load_split(path, dataset.num_nodes())?),
        SplitSource::Random { .. } => None,
    };
    let grid = spec.grid();
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let jobs: Vec<(GridPoint, u64)> = grid
        .iter()
        .flat_map(|g| seeds.iter().map(move |&s| (*g, s)))
        .collect();
    let results: Vec<Result<RunOutput, String>> = jobs
        .par_iter()
        .map(|(g, seed)| {
            let split = split_for(dataset, spec, fixed.as_ref(), g, *seed)?;
            let cfg = spec.train.with_seed(*seed);
            let (metrics, log) = evaluate_method(
                dataset,
                &split,
                g.method,
                g.alpha,
                spec.max_iterations,
                &cfg,
            )?;
            Ok(RunOutput { metrics, log })
        })
        .collect();

    let name = dataset.name().to_string();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut logs = Vec::new();
    for ((grid, seed), result) in jobs.into_iter().zip(results) {
        let outcome = result.map(|out| {
            if let Some(log) = out.log {
                logs.push((grid, seed, log));
            }
            out.metrics
        });
        rows.push(ResultRow {
            dataset: name.clone(),
            grid,
            seed,
            outcome,
        });
    }
    let aggregates = grid
        .iter()
        .map(|g| {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.grid == *g)
                .filter_map(|r| r.outcome.as_ref().ok().map(|m| m.accuracy))
                .collect();
            let (mean, std) = mean_and_std(&accs).unwrap_or((f64::NAN, None));
            Aggregate {
                grid: *g,
                runs: accs.len(),
                mean,
                std,
            }
        })
        .collect();
    Ok(ExperimentReport {
        dataset: name,
        rows,
        aggregates,
        logs,
    })
}

/// Confidence-threshold sweep for `safegcn` over the given values.
pub fn sweep_alpha(
    spec: &ExperimentSpec,
    alphas: &[f64],
) -> Result<ExperimentReport, HarnessError> {
    let mut spec = spec.clone();
    spec.methods = vec![Method::SafeGcn];
    spec.alphas = Some(alphas.to_vec());
    run_experiment(&spec)
}

/// Label-budget sweep over per-class counts on random splits.
pub fn sweep_label_ratio(
    spec: &ExperimentSpec,
    counts: &[usize],
) -> Result<ExperimentReport, HarnessError> {
    let mut spec = spec.clone();
    spec.labels_per_class = Some(counts.to_vec());
    run_experiment(&spec)
}
