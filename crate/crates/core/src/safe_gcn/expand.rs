use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::pool::{LabeledPool, PoolEntry, Provenance};
use super::SafeGcnError;
use crate::model::Predictions;

/// Filter condition: both models agree on the label and the GCN maximum is
/// at least the S-GCN maximum, which is itself at least `alpha`.
#[inline]
pub fn admits(
    gcn_score: f64,
    sgcn_score: f64,
    gcn_label: usize,
    sgcn_label: usize,
    alpha: f64,
) -> bool {
    gcn_label == sgcn_label && gcn_score >= sgcn_score && sgcn_score >= alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    /// The GCN's argmax.
    pub label: usize,
    pub gcn_score: f64,
    pub sgcn_score: f64,
}

/// Filter-passing nodes grouped by pseudo-label. Each class list is ordered
/// by GCN score, highest first, ties by ascending node index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    by_class: BTreeMap<usize, Vec<Candidate>>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.by_class.is_empty()
    }

    pub fn len(&self) -> usize {
        self.by_class.values().map(Vec::len).sum()
    }

    /// Candidate count per class present in the set.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        self.by_class.iter().map(|(&c, v)| (c, v.len())).collect()
    }

    pub fn class(&self, label: usize) -> &[Candidate] {
        self.by_class.get(&label).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.by_class.values().flatten()
    }
}

/// Applies the filter condition to every unlabeled node. Row `i` of both
/// prediction sets belongs to `nodes[i]`.
pub fn select_candidates(
    nodes: &[usize],
    sgcn: &Predictions,
    gcn: &Predictions,
    alpha: f64,
) -> Result<CandidateSet, SafeGcnError> {
    if sgcn.len() != nodes.len() || gcn.len() != nodes.len() {
        return Err(SafeGcnError::PredictionMismatch {
            nodes: nodes.len(),
            sgcn: sgcn.len(),
            gcn: gcn.len(),
        });
    }
    let mut by_class: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for (i, &node) in nodes.iter().enumerate() {
        let (gcn_score, sgcn_score) = (gcn.scores[i], sgcn.scores[i]);
        if admits(gcn_score, sgcn_score, gcn.labels[i], sgcn.labels[i], alpha) {
            by_class.entry(gcn.labels[i]).or_default().push(Candidate {
                node,
                label: gcn.labels[i],
                gcn_score,
                sgcn_score,
            });
        }
    }
    for list in by_class.values_mut() {
        list.sort_by(|a, b| {
            b.gcn_score
                .total_cmp(&a.gcn_score)
                .then(a.node.cmp(&b.node))
        });
    }
    Ok(CandidateSet { by_class })
}

/// One expansion step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub iteration: usize,
    pub histogram: BTreeMap<usize, usize>,
    /// Smallest per-class candidate count among present classes (0 if none).
    pub admitted_per_class: usize,
    pub admitted: BTreeMap<usize, Vec<usize>>,
    pub pool_before: usize,
    pub pool_after: usize,
}

impl ExpansionRecord {
    pub fn admitted_total(&self) -> usize {
        self.admitted.values().map(Vec::len).sum()
    }
}

/// Moves the top `s` candidates of every present class into the pool, where
/// `s` is the smallest present-class count, and removes them from
/// `unlabeled`. Classes without candidates receive nothing. The candidate set
/// is consumed.
pub fn balanced_expand(
    pool: &mut LabeledPool,
    unlabeled: &mut Vec<usize>,
    candidates: CandidateSet,
    iteration: usize,
) -> Result<ExpansionRecord, SafeGcnError> {
    let histogram = candidates.histogram();
    let pool_before = pool.len();
    let s = histogram.values().copied().min().unwrap_or(0);
    let unlabeled_set: HashSet<usize> = unlabeled.iter().copied().collect();

    let mut admitted: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&label, list) in &candidates.by_class {
        for c in &list[..s] {
            if pool.contains(c.node) {
                return Err(SafeGcnError::PoolCollision { node: c.node });
            }
            if !unlabeled_set.contains(&c.node) {
                return Err(SafeGcnError::NotUnlabeled { node: c.node });
            }
            pool.insert(PoolEntry {
                node: c.node,
                label,
                provenance: Provenance::Pseudo,
                iteration_added: iteration,
                gcn_score: Some(c.gcn_score),
                sgcn_score: Some(c.sgcn_score),
            })?;
            admitted.entry(label).or_default().push(c.node);
        }
    }
    let taken: HashSet<usize> = admitted.values().flatten().copied().collect();
    unlabeled.retain(|n| !taken.contains(n));

    Ok(ExpansionRecord {
        iteration,
        histogram,
        admitted_per_class: s,
        admitted,
        pool_before,
        pool_after: pool.len(),
    })
}
