//! Graph semi-supervised node classification with safe self-training.
//!
//! - [`graph`]: CSR graphs, the normalized propagator, induced subgraphs
//! - [`nn`]: dense kernels, losses, dropout and Adam
//! - [`model`]: the two-layer GCN and its labeled-only variant
//! - [`safe_gcn`]: dual-model pseudo-labeling with balanced expansion
//! - [`dataset`]: on-disk format, splits, synthetic block-model graphs
//! - [`harness`]: experiment grids, aggregation and CSV output

pub mod dataset;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod safe_gcn;

pub use dataset::{Dataset, Split};
pub use graph::{NodeSubset, Propagator, SparseGraph};
pub use model::{GcnParams, Predictions, TrainConfig};
pub use nn::{DenseMatrix, Rng};
pub use safe_gcn::{LabeledPool, SafeGcnConfig};
