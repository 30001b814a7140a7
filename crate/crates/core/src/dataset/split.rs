use std::collections::HashSet;

use rand::seq::SliceRandom;
use thiserror::Error;

use super::{Dataset, DatasetError};
use crate::nn::Rng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("node {node} is out of range for {num_nodes} nodes")]
    OutOfRange { node: usize, num_nodes: usize },
    #[error("node {node} appears more than once across the split")]
    Overlap { node: usize },
    #[error("the test set is empty")]
    EmptyTest,
}

/// Disjoint labeled-train, unlabeled-train and test node lists, each sorted.
/// Nodes in none of the three are excluded from training and testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    train_labeled: Vec<usize>,
    train_unlabeled: Vec<usize>,
    test: Vec<usize>,
}

impl Split {
    pub fn new(
        mut train_labeled: Vec<usize>,
        mut train_unlabeled: Vec<usize>,
        mut test: Vec<usize>,
    ) -> Self {
        train_labeled.sort_unstable();
        train_unlabeled.sort_unstable();
        test.sort_unstable();
        Self {
            train_labeled,
            train_unlabeled,
            test,
        }
    }

    pub fn train_labeled(&self) -> &[usize] {
        &self.train_labeled
    }

    pub fn train_unlabeled(&self) -> &[usize] {
        &self.train_unlabeled
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Labeled and unlabeled training nodes, sorted.
    pub fn train_nodes(&self) -> Vec<usize> {
        let mut nodes = [self.train_labeled.as_slice(), &self.train_unlabeled].concat();
        nodes.sort_unstable();
        nodes
    }

    pub fn validate(&self, num_nodes: usize) -> Result<(), SplitError> {
        if self.test.is_empty() {
            return Err(SplitError::EmptyTest);
        }
        let mut seen = HashSet::new();
        for &node in self
            .train_labeled
            .iter()
            .chain(&self.train_unlabeled)
            .chain(&self.test)
        {
            if node >= num_nodes {
                return Err(SplitError::OutOfRange { node, num_nodes });
            }
            if !seen.insert(node) {
                return Err(SplitError::Overlap { node });
            }
        }
        Ok(())
    }
}

/// Samples `labels_per_class` labeled nodes from every class, then
/// `test_size` test nodes from the rest; everything left is unlabeled
/// training data.
pub fn make_split(
    dataset: &Dataset,
    labels_per_class: usize,
    test_size: usize,
    rng: &mut Rng,
) -> Result<Split, DatasetError> {
    if labels_per_class == 0 {
        return Err(DatasetError::Invalid(
            "labels per class must be at least 1".into(),
        ));
    }
    if test_size == 0 {
        return Err(SplitError::EmptyTest.into());
    }
    let mut labeled = Vec::with_capacity(labels_per_class * dataset.num_classes());
    for (class, mut nodes) in dataset.nodes_by_class().into_iter().enumerate() {
        if nodes.len() < labels_per_class {
            return Err(DatasetError::InsufficientClass {
                class,
                available: nodes.len(),
                required: labels_per_class,
            });
        }
        nodes.shuffle(rng.inner_mut());
        labeled.extend_from_slice(&nodes[..labels_per_class]);
    }
    let taken: HashSet<usize> = labeled.iter().copied().collect();
    let mut rest: Vec<usize> = (0..dataset.num_nodes())
        .filter(|n| !taken.contains(n))
        .collect();
    if rest.len() < test_size {
        return Err(DatasetError::InsufficientNodes {
            available: rest.len(),
            required: test_size,
        });
    }
    rest.shuffle(rng.inner_mut());
    let unlabeled = rest.split_off(test_size);
    Ok(Split::new(labeled, unlabeled, rest))
}
