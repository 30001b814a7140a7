//! Sparse undirected graphs in CSR form, the augmented symmetric
//! normalization `D̃^{-1/2}(A + I)D̃^{-1/2}`, and induced subgraphs.

use rayon::prelude::*;
use thiserror::Error;

use crate::nn::DenseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} is out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("self-loop on node {node}; the normalization adds self-connections itself")]
    SelfLoop { node: usize },
    #[error("propagator has {expected} nodes but the dense operand has {found} rows")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Undirected, unweighted graph. Every edge `{u, v}` is stored as both
/// `(u, v)` and `(v, u)`; neighbor lists are strictly increasing and never
/// contain the row's own node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparseGraph {
    /// Builds the CSR structure from unordered pairs. Repeated pairs, in
    /// either orientation, collapse to a single edge.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut entries = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(GraphError::NodeOutOfRange { node, num_nodes });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            entries.push((u, v));
            entries.push((v, u));
        }
        entries.sort_unstable();
        entries.dedup();

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &entries {
            row_offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = entries.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored directed entries (twice the edge count).
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[node]..self.row_offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_offsets[node + 1] - self.row_offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Propagator over `A + I` with entries `1 / sqrt(d̃_i d̃_j)`.
    pub fn normalize(&self) -> Propagator {
        let n = self.num_nodes;
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(self.col_indices.len() + n);
        let mut values = Vec::with_capacity(self.col_indices.len() + n);
        row_offsets.push(0);
        for i in 0..n {
            let d_i = self.degree(i) + 1;
            let neighbors = self.neighbors(i);
            let split = neighbors.partition_point(|&j| j < i);
            let row = neighbors[..split]
                .iter()
                .copied()
                .chain(std::iter::once(i))
                .chain(neighbors[split..].iter().copied());
            for j in row {
                let d_j = self.degree(j) + 1;
                col_indices.push(j);
                values.push(1.0 / ((d_i * d_j) as f64).sqrt());
            }
            row_offsets.push(col_indices.len());
        }
        Propagator {
            num_nodes: n,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Graph on the subset's nodes, in the subset's sorted order, keeping the
    /// edges whose endpoints both lie in the subset.
    pub fn induced_subgraph(&self, subset: &NodeSubset) -> Result<SparseGraph, GraphError> {
        if let Some(&node) = subset.nodes().last() {
            if node >= self.num_nodes {
                return Err(GraphError::NodeOutOfRange {
                    node,
                    num_nodes: self.num_nodes,
                });
            }
        }
        let mut row_offsets = Vec::with_capacity(subset.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for &parent in subset.nodes() {
            col_indices.extend(
                self.neighbors(parent)
                    .iter()
                    .filter_map(|&v| subset.local_index(v)),
            );
            row_offsets.push(col_indices.len());
        }
        Ok(SparseGraph {
            num_nodes: subset.len(),
            row_offsets,
            col_indices,
        })
    }
}

/// Sorted, duplicate-free selection of nodes from a parent graph. Local index
/// `k` refers to the `k`-th smallest selected parent node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSubset {
    nodes: Vec<usize>,
    parent_nodes: usize,
}

impl NodeSubset {
    pub fn new(mut nodes: Vec<usize>, parent_nodes: usize) -> Result<Self, GraphError> {
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&node) = nodes.last() {
            if node >= parent_nodes {
                return Err(GraphError::NodeOutOfRange {
                    node,
                    num_nodes: parent_nodes,
                });
            }
        }
        Ok(Self {
            nodes,
            parent_nodes,
        })
    }

    pub fn all(parent_nodes: usize) -> Self {
        Self {
            nodes: (0..parent_nodes).collect(),
            parent_nodes,
        }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn parent_nodes(&self) -> usize {
        self.parent_nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local_index(&self, parent: usize) -> Option<usize> {
        self.nodes.binary_search(&parent).ok()
    }

    pub fn parent_index(&self, local: usize) -> usize {
        self.nodes[local]
    }
}

/// Normalized augmented adjacency in CSR form, ready for sparse-dense products.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

const SPMM_ROW_CHUNK: usize = 64;

impl Propagator {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `(i, j)`, zero when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.set(i, self.col_indices[k], self.values[k]);
            }
        }
        out
    }

    /// `Â · m`. Each output row accumulates its terms in ascending column
    /// order, so the result does not depend on how rows are scheduled.
    pub fn spmm(&self, m: &DenseMatrix) -> Result<DenseMatrix, GraphError> {
        if m.rows() != self.num_nodes {
            return Err(GraphError::DimensionMismatch {
                expected: self.num_nodes,
                found: m.rows(),
            });
        }
        let width = m.cols();
        let mut out = DenseMatrix::zeros(self.num_nodes, width);
        if width == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(width * SPMM_ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (offset, out_row) in block.chunks_mut(width).enumerate() {
                    let i = chunk * SPMM_ROW_CHUNK + offset;
                    for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                        let w = self.values[k];
                        for (o, &x) in out_row.iter_mut().zip(m.row(self.col_indices[k])) {
                            *o += w * x;
                        }
                    }
                }
            });
        Ok(out)
    }
}
