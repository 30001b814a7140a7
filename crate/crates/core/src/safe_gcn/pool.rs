use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SafeGcnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub node: usize,
    pub label: usize,
    pub provenance: Provenance,
    /// 0 for seed labels, otherwise the expansion iteration (1-based).
    pub iteration_added: usize,
    /// Maximum GCN probability when admitted; `None` for seeds.
    pub gcn_score: Option<f64>,
    /// Maximum S-GCN probability when admitted; `None` for seeds.
    pub sgcn_score: Option<f64>,
}

/// The growing labeled set. Entries are unique per node and never removed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPool {
    entries: Vec<PoolEntry>,
    members: BTreeSet<usize>,
}

impl LabeledPool {
    pub fn from_seeds(seeds: &[(usize, usize)]) -> Result<Self, SafeGcnError> {
        let mut pool = Self::default();
        for &(node, label) in seeds {
            pool.insert(PoolEntry {
                node,
                label,
                provenance: Provenance::Seed,
                iteration_added: 0,
                gcn_score: None,
                sgcn_score: None,
            })?;
        }
        Ok(pool)
    }

    pub(crate) fn insert(&mut self, entry: PoolEntry) -> Result<(), SafeGcnError> {
        if !self.members.insert(entry.node) {
            return Err(SafeGcnError::PoolCollision { node: entry.node });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    /// Entries in admission order.
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Member nodes in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    /// `(node, label)` pairs sorted by node.
    pub fn labeled_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self.entries.iter().map(|e| (e.node, e.label)).collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for e in &self.entries {
            if e.label < num_classes {
                counts[e.label] += 1;
            }
        }
        counts
    }
}
