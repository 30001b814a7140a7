//! Node-classification datasets: the canonical text directory format,
//! train/test splits and a stochastic-block-model generator.
//!
//! A dataset directory holds
//!
//! - `meta.json`: `{"name", "num_nodes", "num_features", "num_classes"}`
//! - `features.txt`: `node feat value` triplets sorted by `(node, feat)`; absent pairs are 0
//! - `labels.txt`: `node label`, one line per node, sorted by node
//! - `edges.txt`: `u v` with `u < v`, each undirected edge once, sorted
//! - `split.json` (optional): integer arrays `train_labeled`, `train_unlabeled`, `test`

mod io;
mod sbm;
mod split;

use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{GraphError, SparseGraph};
use crate::nn::DenseMatrix;

pub use io::{load, load_split, save, save_split};
pub use sbm::{sbm_generate, SbmConfig};
pub use split::{make_split, Split, SplitError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("class {class} has {available} nodes, {required} requested per class")]
    InsufficientClass {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("{available} nodes remain after labeling, {required} requested for testing")]
    InsufficientNodes { available: usize, required: usize },
    #[error("invalid generator settings: {0}")]
    InvalidGenerator(String),
}

/// Features, labels and graph of one node-classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: DenseMatrix,
    labels: Vec<usize>,
    graph: SparseGraph,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: DenseMatrix,
        labels: Vec<usize>,
        graph: SparseGraph,
        num_classes: usize,
    ) -> Result<Self, DatasetError> {
        let n = labels.len();
        if features.rows() != n || graph.num_nodes() != n {
            return Err(DatasetError::Invalid(format!(
                "{} labels, {} feature rows, {} graph nodes",
                n,
                features.rows(),
                graph.num_nodes()
            )));
        }
        if !features.is_finite() {
            return Err(DatasetError::Invalid("non-finite feature value".into()));
        }
        let mut counts = vec![0usize; num_classes];
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(DatasetError::Invalid(format!(
                    "node {node} has label {label}, expected < {num_classes}"
                )));
            }
            counts[label] += 1;
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(DatasetError::Invalid(format!("class {class} has no nodes")));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            graph,
            num_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Nodes of each class in ascending order.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (node, &label) in self.labels.iter().enumerate() {
            out[label].push(node);
        }
        out
    }
}
