use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use safegcn::dataset::{self, SbmConfig};
use safegcn::harness::{self, ExperimentSpec, Method, SplitSource, DEFAULT_TEST_SIZE};
use safegcn::{Rng, TrainConfig};

/// Runs S-GCN, GCN and Safe-GCN experiments on a dataset directory and
/// writes one CSV row per (grid point, seed) plus an aggregate row per grid point.
#[derive(Debug, Parser)]
#[command(name = "safegcn", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic stochastic-block-model dataset directory.
    Sbm(SbmArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Dataset directory (meta.json, features.txt, labels.txt, edges.txt).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated methods: sgcn, gcn, safegcn.
    #[arg(long, value_delimiter = ',', default_value = "safegcn")]
    method: Vec<Method>,
    /// Confidence threshold (safegcn only).
    #[arg(long)]
    alpha: Option<f64>,
    /// Labels per class for random splits.
    #[arg(long)]
    labels_per_class: Option<usize>,
    /// Test nodes drawn per random split.
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
    test_size: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Expansion iteration cap (safegcn only).
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Seeds as a comma list; `a..b` expands to a half-open range.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<String>,
    /// Fixed split file instead of random per-seed splits.
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Sweep over these thresholds (implies --method safegcn).
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha")]
    sweep_alpha: Option<Vec<f64>>,
    /// Sweep over these per-class label counts.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["labels_per_class", "split_file"])]
    sweep_labels: Option<Vec<usize>>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Line-delimited JSON log of every expansion iteration.
    #[arg(long)]
    log_expansions: Option<PathBuf>,
    /// Leave the wall_time_s column empty for byte-exact comparisons.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct SbmArgs {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 50)]
    nodes_per_class: usize,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    /// Defaults to the number of classes.
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    feature_shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a random split with this many labels per class.
    #[arg(long, requires = "split_test_size")]
    split_labels: Option<usize>,
    #[arg(long, requires = "split_labels")]
    split_test_size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_seeds(raw: &[String]) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for item in raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let number = |s: &str| s.parse::<u64>().map_err(|_| format!("bad seed {s:?}"));
        match item.split_once("..") {
            Some((lo, hi)) => seeds.extend(number(lo)?..number(hi)?),
            None => seeds.push(number(item)?),
        }
    }
    Ok(seeds)
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, String> {
    let dataset = args.dataset.clone().ok_or("--dataset is required")?;
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: args.lr.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        dropout_p: args.dropout.unwrap_or(defaults.dropout_p),
        hidden_width: args.hidden.unwrap_or(defaults.hidden_width),
        weight_decay: args.weight_decay.unwrap_or(defaults.weight_decay),
        ..defaults
    };
    let mut spec = ExperimentSpec::new(dataset, args.method.clone(), parse_seeds(&args.seeds)?);
    spec.train = train;
    spec.alphas = args.alpha.map(|a| vec![a]);
    spec.labels_per_class = args.labels_per_class.map(|n| vec![n]);
    if let Some(n) = args.max_iterations {
        spec.max_iterations = n;
    }
    spec.split = match &args.split_file {
        Some(path) => SplitSource::Fixed(path.clone()),
        None => SplitSource::Random {
            test_size: args.test_size,
        },
    };
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<bool, String> {
    let spec = build_spec(args)?;
    let report = match (&args.sweep_alpha, &args.sweep_labels) {
        (Some(alphas), None) => harness::sweep_alpha(&spec, alphas),
        (None, Some(counts)) => harness::sweep_label_ratio(&spec, counts),
        (Some(alphas), Some(counts)) => {
            let mut spec = spec;
            spec.methods = vec![Method::SafeGcn];
            spec.alphas = Some(alphas.clone());
            harness::sweep_label_ratio(&spec, counts)
        }
        (None, None) => harness::run_experiment(&spec),
    }
    .map_err(|e| e.to_string())?;

    for row in &report.rows {
        if let Err(message) = &row.outcome {
            eprintln!("error: {} seed {}: {message}", row.grid.method, row.seed);
        }
    }
    let timing = !args.no_timing;
    let io_err = |e: harness::HarnessError| e.to_string();
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            report
                .write_csv(BufWriter::new(file), timing)
                .map_err(io_err)?;
        }
        None => report
            .write_csv(io::stdout().lock(), timing)
            .map_err(io_err)?,
    }
    if let Some(path) = &args.log_expansions {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        report
            .write_expansion_logs(BufWriter::new(file))
            .map_err(io_err)?;
    }
    Ok(!report.has_errors())
}

fn sbm(args: &SbmArgs) -> Result<(), String> {
    let cfg = SbmConfig {
        classes: args.classes,
        nodes_per_class: args.nodes_per_class,
        p_in: args.p_in,
        p_out: args.p_out,
        feature_dim: args.feature_dim.unwrap_or(args.classes),
        feature_shift: args.feature_shift,
    };
    let mut rng = Rng::new(args.seed);
    let ds = dataset::sbm_generate(&cfg, &mut rng).map_err(|e| e.to_string())?;
    dataset::save(&ds, &args.out).map_err(|e| e.to_string())?;
    if let (Some(k), Some(test)) = (args.split_labels, args.split_test_size) {
        let split = dataset::make_split(&ds, k, test, &mut rng).map_err(|e| e.to_string())?;
        dataset::save_split(&split, args.out.join("split.json")).map_err(|e| e.to_string())?;
    }
    let mut out = io::stderr();
    let _ = writeln!(
        out,
        "wrote {} ({} nodes, {} edges) to {}",
        ds.name(),
        ds.num_nodes(),
        ds.graph().num_edges(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Sbm(args)) => sbm(args).map(|_| true),
        None => run(&cli.run),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
