//! Safe self-training.
//!
//! Each iteration trains two models on the current labeled pool: the
//! supervised S-GCN on the pool-induced subgraph and the GCN on the whole
//! training graph (labeled and unlabeled training nodes, never test nodes).
//! Unlabeled nodes that both models label identically, with the GCN at least
//! as confident as the S-GCN and the S-GCN at least `alpha` confident, become
//! candidates. The pool then grows by the same number of top-ranked
//! candidates per class. The loop stops when no candidate remains, and a
//! final S-GCN trained on the expanded pool classifies the test nodes.
//!
//! Unlabeled nodes are scored by the S-GCN with an evaluation-mode forward
//! pass over the training graph using its pool-trained weights. Test nodes
//! are classified the same way, over the graph induced by pool and test
//! nodes.

mod expand;
mod pool;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Split, SplitError};
use crate::graph::{GraphError, NodeSubset};
use crate::model::{self, GcnParams, ModelError, Predictions, TrainConfig};
use crate::nn::mix_seed;

pub use expand::{
    admits, balanced_expand, select_candidates, Candidate, CandidateSet, ExpansionRecord,
};
pub use pool::{LabeledPool, PoolEntry, Provenance};

#[derive(Debug, Error, PartialEq)]
pub enum SafeGcnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the split has no labeled training nodes")]
    NoLabeledNodes,
    #[error("{nodes} unlabeled nodes but {sgcn} S-GCN and {gcn} GCN prediction rows")]
    PredictionMismatch {
        nodes: usize,
        sgcn: usize,
        gcn: usize,
    },
    #[error("node {node} is already in the labeled pool")]
    PoolCollision { node: usize },
    #[error("candidate node {node} is not in the unlabeled set")]
    NotUnlabeled { node: usize },
    #[error("test node {node} is also in the labeled pool")]
    TestOverlap { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeGcnConfig {
    /// Confidence threshold. Values above 1 admit nothing.
    pub alpha: f64,
    pub max_iterations: usize,
    /// Shared by the GCN, the per-iteration S-GCN and the final S-GCN.
    pub train: TrainConfig,
}

impl Default for SafeGcnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            max_iterations: 100,
            train: TrainConfig::default(),
        }
    }
}

impl SafeGcnConfig {
    pub fn validate(&self) -> Result<(), SafeGcnError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SafeGcnError::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.max_iterations == 0 {
            return Err(SafeGcnError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        self.train.validate()?;
        Ok(())
    }
}

/// Why the expansion loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No unlabeled node passed the filter.
    NoCandidates,
    /// Every unlabeled training node has been pseudo-labeled.
    UnlabeledExhausted,
    /// `max_iterations` was reached while candidates were still found.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLog {
    pub alpha: f64,
    pub records: Vec<ExpansionRecord>,
    pub termination: Termination,
}

impl ExpansionLog {
    /// Iterations in which both models were trained and scored.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// One JSON object per iteration, newline-terminated. `context` fields
    /// (e.g. dataset and seed) are merged into every object.
    pub fn write_jsonl<W: Write>(
        &self,
        out: &mut W,
        context: &serde_json::Map<String, serde_json::Value>,
    ) -> std::io::Result<()> {
        for record in &self.records {
            let mut object = context.clone();
            if let serde_json::Value::Object(fields) =
                serde_json::to_value(record).map_err(std::io::Error::other)?
            {
                object.extend(fields);
            }
            object.insert("alpha".into(), self.alpha.into());
            object.insert(
                "termination".into(),
                serde_json::to_value(self.termination).map_err(std::io::Error::other)?,
            );
            serde_json::to_writer(&mut *out, &object).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SafeGcnOutcome {
    pub pool: LabeledPool,
    pub log: ExpansionLog,
    /// The final S-GCN, trained on the expanded pool.
    pub params: GcnParams,
}

/// Seed stream of the per-iteration models; the final S-GCN uses the base seed.
fn iteration_seed(base: u64, iteration: usize, gcn: bool) -> u64 {
    mix_seed(base, 2 * iteration as u64 + u64::from(gcn))
}

/// Runs the expansion loop and trains the final S-GCN.
pub fn run(
    dataset: &Dataset,
    split: &Split,
    config: &SafeGcnConfig,
) -> Result<SafeGcnOutcome, SafeGcnError> {
    config.validate()?;
    split.validate(dataset.num_nodes())?;
    if split.train_labeled().is_empty() {
        return Err(SafeGcnError::NoLabeledNodes);
    }
    let labels = dataset.labels();
    let classes = dataset.num_classes();
    let seeds: Vec<(usize, usize)> = split
        .train_labeled()
        .iter()
        .map(|&n| (n, labels[n]))
        .collect();
    let mut pool = LabeledPool::from_seeds(&seeds)?;
    let mut unlabeled = split.train_unlabeled().to_vec();

    let train_nodes = NodeSubset::new(split.train_nodes(), dataset.num_nodes())?;
    let train_propagator = dataset.graph().induced_subgraph(&train_nodes)?.normalize();
    let train_features = dataset.features().select_rows(train_nodes.nodes());
    let local = |node: usize| {
        train_nodes
            .local_index(node)
            .expect("pool and unlabeled nodes are training nodes")
    };

    let mut records = Vec::new();
    let mut termination = Termination::IterationCap;
    for iteration in 1..=config.max_iterations {
        if unlabeled.is_empty() {
            termination = Termination::UnlabeledExhausted;
            break;
        }
        let pairs = pool.labeled_pairs();
        let sgcn_cfg = config
            .train
            .with_seed(iteration_seed(config.train.seed, iteration, false));
        let gcn_cfg = config
            .train
            .with_seed(iteration_seed(config.train.seed, iteration, true));

        let mut local_labels = vec![0; train_nodes.len()];
        let mask: Vec<usize> = pairs
            .iter()
            .map(|&(node, label)| {
                let i = local(node);
                local_labels[i] = label;
                i
            })
            .collect();

        let (sgcn, gcn) = rayon::join(
            || {
                model::train_sgcn(
                    dataset.features(),
                    dataset.graph(),
                    &pairs,
                    classes,
                    &sgcn_cfg,
                )
            },
            || {
                model::train(
                    &train_features,
                    &train_propagator,
                    &local_labels,
                    &mask,
                    classes,
                    &gcn_cfg,
                )
            },
        );
        let (sgcn, gcn) = (sgcn?, gcn?);

        let rows: Vec<usize> = unlabeled.iter().map(|&n| local(n)).collect();
        let sgcn_pred = model::predict(&sgcn, &train_propagator, &train_features)?.select(&rows);
        let gcn_pred = model::predict(&gcn, &train_propagator, &train_features)?.select(&rows);
        let candidates = select_candidates(&unlabeled, &sgcn_pred, &gcn_pred, config.alpha)?;
        let record = balanced_expand(&mut pool, &mut unlabeled, candidates, iteration)?;
        let done = record.admitted_total() == 0;
        records.push(record);
        if done {
            termination = Termination::NoCandidates;
            break;
        }
    }
    if termination == Termination::IterationCap && unlabeled.is_empty() {
        termination = Termination::UnlabeledExhausted;
    }

    let params = model::train_sgcn(
        dataset.features(),
        dataset.graph(),
        &pool.labeled_pairs(),
        classes,
        &config.train,
    )?;
    Ok(SafeGcnOutcome {
        pool,
        log: ExpansionLog {
            alpha: config.alpha,
            records,
            termination,
        },
        params,
    })
}

/// Classifies `test_nodes` with weights trained on the pool, propagating over
/// the graph induced by pool and test nodes. Rows follow `test_nodes`.
pub fn final_predict(
    params: &GcnParams,
    dataset: &Dataset,
    pool: &LabeledPool,
    test_nodes: &[usize],
) -> Result<Predictions, SafeGcnError> {
    if let Some(&node) = test_nodes.iter().find(|&&n| pool.contains(n)) {
        return Err(SafeGcnError::TestOverlap { node });
    }
    let context: Vec<usize> = pool.nodes().collect();
    predict_with_context(params, dataset, &context, test_nodes)
}

/// Evaluation-mode predictions for `targets`, propagating over the subgraph
/// induced by `context ∪ targets`. Rows follow `targets`.
pub fn predict_with_context(
    params: &GcnParams,
    dataset: &Dataset,
    context: &[usize],
    targets: &[usize],
) -> Result<Predictions, SafeGcnError> {
    let subset = NodeSubset::new(
        context.iter().chain(targets).copied().collect(),
        dataset.num_nodes(),
    )?;
    let preds = model::predict_on_subgraph(params, dataset.features(), dataset.graph(), &subset)?;
    let rows: Vec<usize> = targets
        .iter()
        .map(|&n| subset.local_index(n).expect("targets are in the subset"))
        .collect();
    Ok(preds.select(&rows))
}

/// Fraction of rows whose argmax equals the ground truth of the matching node.
pub fn accuracy(preds: &Predictions, nodes: &[usize], truth: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = preds
        .labels
        .iter()
        .zip(nodes)
        .filter(|(&p, &n)| p == truth[n])
        .count();
    correct as f64 / nodes.len() as f64
}
