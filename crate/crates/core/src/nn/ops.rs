use super::{DenseMatrix, NnError, Rng};

pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for v in out.as_mut_slice() {
        *v = v.max(0.0);
    }
    out
}

/// Passes `upstream` through where `input > 0`; the subgradient at 0 is 0.
pub fn relu_backward(input: &DenseMatrix, upstream: &DenseMatrix) -> Result<DenseMatrix, NnError> {
    if input.shape() != upstream.shape() {
        return Err(NnError::shape(
            "relu_backward",
            input.shape(),
            upstream.shape(),
        ));
    }
    let mut out = upstream.clone();
    for (g, &x) in out.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Row-wise softmax with row-max subtraction.
pub fn softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    if out.cols() == 0 {
        return out;
    }
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood over the masked rows, together with the
/// gradient of that loss with respect to the pre-softmax logits.
///
/// `labels` is indexed by row; only masked rows are read. Rows outside the
/// mask get a zero gradient.
pub fn cross_entropy_masked(
    probs: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, DenseMatrix), NnError> {
    if mask.is_empty() {
        return Err(NnError::EmptyMask);
    }
    if labels.len() != probs.rows() {
        return Err(NnError::LabelCount {
            expected: probs.rows(),
            found: labels.len(),
        });
    }
    let classes = probs.cols();
    let scale = 1.0 / mask.len() as f64;
    let mut grad = DenseMatrix::zeros(probs.rows(), classes);
    let mut loss = 0.0;
    for &node in mask {
        if node >= probs.rows() {
            return Err(NnError::MaskOutOfRange {
                node,
                rows: probs.rows(),
            });
        }
        let label = labels[node];
        if label >= classes {
            return Err(NnError::LabelOutOfRange {
                node,
                label,
                classes,
            });
        }
        let p = probs.row(node);
        loss -= p[label].ln();
        let g = grad.row_mut(node);
        for (gc, &pc) in g.iter_mut().zip(p) {
            *gc += pc * scale;
        }
        g[label] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Keep-flags of one dropout application plus the survivor scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<bool>,
    pub scale: f64,
}

impl DropoutMask {
    pub fn all_kept(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            scale: 1.0,
        }
    }
}

/// Inverted dropout. In evaluation mode (`training == false`) the input is
/// returned unchanged and no random numbers are consumed.
pub fn dropout(
    m: &DenseMatrix,
    p: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(DenseMatrix, DropoutMask), NnError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NnError::InvalidDropout(p));
    }
    if !training || p == 0.0 {
        return Ok((m.clone(), DropoutMask::all_kept(m.as_slice().len())));
    }
    let scale = 1.0 / (1.0 - p);
    let mut out = m.clone();
    let mut keep = Vec::with_capacity(out.as_slice().len());
    for v in out.as_mut_slice() {
        let kept = rng.uniform() >= p;
        keep.push(kept);
        *v = if kept { *v * scale } else { 0.0 };
    }
    Ok((out, DropoutMask { keep, scale }))
}

pub fn dropout_backward(
    upstream: &DenseMatrix,
    mask: &DropoutMask,
) -> Result<DenseMatrix, NnError> {
    if mask.keep.len() != upstream.as_slice().len() {
        return Err(NnError::shape(
            "dropout_backward",
            upstream.shape(),
            (mask.keep.len(), 1),
        ));
    }
    let mut out = upstream.clone();
    for (g, &kept) in out.as_mut_slice().iter_mut().zip(&mask.keep) {
        *g = if kept { *g * mask.scale } else { 0.0 };
    }
    Ok(out)
}
