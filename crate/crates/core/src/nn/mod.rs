//! Numerical kernels for the two-layer model.

mod adam;
mod init;
mod matrix;
mod ops;
mod rng;
mod sparse;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use init::glorot_init;
pub use matrix::DenseMatrix;
pub use ops::{
    cross_entropy_masked, dropout, dropout_backward, relu, relu_backward, softmax_rows, DropoutMask,
};
pub use rng::{mix_seed, Rng};
pub use sparse::SparseRows;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} cannot back a {rows}x{cols} matrix")]
    BadBuffer {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("dropout probability must lie in [0, 1), got {0}")]
    InvalidDropout(f64),
    #[error("loss mask is empty")]
    EmptyMask,
    #[error("node {node} is outside the {rows}-row prediction matrix")]
    MaskOutOfRange { node: usize, rows: usize },
    #[error("label {label} of node {node} is outside [0, {classes})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        classes: usize,
    },
    #[error("label array has {found} entries but predictions have {expected} rows")]
    LabelCount { expected: usize, found: usize },
    #[error("non-finite gradient at entry {index}")]
    NonFiniteGradient { index: usize },
}

impl NnError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        NnError::ShapeMismatch { op, left, right }
    }
}
