use super::{DenseMatrix, NnError, Rng};

/// Glorot/Xavier uniform initialization on `[-a, a]` with `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<DenseMatrix, NnError> {
    if rows == 0 || cols == 0 {
        return Err(NnError::ZeroDimension { rows, cols });
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_in(-bound, bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}
