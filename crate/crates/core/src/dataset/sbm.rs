use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::graph::SparseGraph;
use crate::nn::{DenseMatrix, Rng};

/// Planted-partition stochastic block model. Node `i` belongs to class
/// `i / nodes_per_class`; its features are `feature_shift · e_class` plus
/// standard Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_shift: f64,
}

pub fn sbm_generate(cfg: &SbmConfig, rng: &mut Rng) -> Result<Dataset, DatasetError> {
    let invalid = |m: String| Err(DatasetError::InvalidGenerator(m));
    if !(0.0 <= cfg.p_out && cfg.p_out <= cfg.p_in && cfg.p_in <= 1.0) {
        return invalid(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        ));
    }
    if cfg.classes == 0 || cfg.nodes_per_class == 0 {
        return invalid("classes and nodes per class must be positive".into());
    }
    if cfg.feature_dim < cfg.classes {
        return invalid(format!(
            "feature dimension {} cannot hold {} class indicators",
            cfg.feature_dim, cfg.classes
        ));
    }
    if !cfg.feature_shift.is_finite() {
        return invalid("feature shift must be finite".into());
    }

    let n = cfg.classes * cfg.nodes_per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.nodes_per_class).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.uniform() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, &edges)?;

    let mut features = DenseMatrix::zeros(n, cfg.feature_dim);
    for (node, &label) in labels.iter().enumerate() {
        let row = features.row_mut(node);
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng.inner_mut());
        }
        row[label] += cfg.feature_shift;
    }

    Dataset::new(
        format!("sbm-{}x{}", cfg.classes, cfg.nodes_per_class),
        features,
        labels,
        graph,
        cfg.classes,
    )
}
