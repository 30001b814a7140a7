use rayon::prelude::*;

use super::{DenseMatrix, NnError, Rng};

const PAR_ROW_CHUNK: usize = 64;

/// Compressed-row copy of a mostly-zero feature matrix, used for the first
/// layer where the input is bag-of-words or TF/IDF data.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(m.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                out.set(r, self.col_indices[k], self.values[k]);
            }
        }
        out
    }

    /// Inverted dropout over the stored entries, one draw per entry in row
    /// order. Dropped entries are kept as explicit zeros.
    pub fn dropout(&self, p: f64, rng: &mut Rng) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidDropout(p));
        }
        let mut out = self.clone();
        if p == 0.0 {
            return Ok(out);
        }
        let scale = 1.0 / (1.0 - p);
        for v in &mut out.values {
            *v = if rng.uniform() >= p { *v * scale } else { 0.0 };
        }
        Ok(out)
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        if self.cols != rhs.rows() {
            return Err(NnError::shape(
                "sparse matmul",
                (self.rows, self.cols),
                rhs.shape(),
            ));
        }
        let n = rhs.cols();
        let mut out = DenseMatrix::zeros(self.rows, n);
        if n == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(n * PAR_ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (offset, out_row) in block.chunks_mut(n).enumerate() {
                    let r = chunk * PAR_ROW_CHUNK + offset;
                    for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                        let a = self.values[k];
                        for (o, &b) in out_row.iter_mut().zip(rhs.row(self.col_indices[k])) {
                            *o += a * b;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn transpose_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        if self.rows != rhs.rows() {
            return Err(NnError::shape(
                "sparse transpose_matmul",
                (self.rows, self.cols),
                rhs.shape(),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols());
        for r in 0..self.rows {
            let rhs_row = rhs.row(r);
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let a = self.values[k];
                for (o, &b) in out.row_mut(self.col_indices[k]).iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}
