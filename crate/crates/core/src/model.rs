//! Two-layer GCN, `softmax(Â · relu(Â · X · W0 + b0) · W1 + b1)`, trained
//! full-batch with manual backpropagation and Adam, plus the supervised
//! variant (S-GCN) that sees only the labeled-induced subgraph.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeSubset, Propagator, SparseGraph};
use crate::nn::{
    adam_step, cross_entropy_masked, dropout, dropout_backward, glorot_init, relu, relu_backward,
    softmax_rows, AdamState, DenseMatrix, DropoutMask, NnError, Rng, SparseRows,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("cannot train on an empty labeled set")]
    EmptyLabeledSet,
    #[error("node {0} appears more than once in the labeled set")]
    DuplicateLabeledNode(usize),
    #[error("feature matrix has {found} rows but the graph has {expected} nodes")]
    FeatureRows { expected: usize, found: usize },
    #[error("parameter shapes do not match the input: {0}")]
    ParamShape(String),
}

/// Weights of the two-layer model. GCN and S-GCN share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w0: DenseMatrix,
    pub b0: Vec<f64>,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
}

impl GcnParams {
    /// Glorot-initialized weights and zero biases.
    pub fn init(
        features: usize,
        hidden: usize,
        classes: usize,
        rng: &mut Rng,
    ) -> Result<Self, ModelError> {
        let w0 = glorot_init(features, hidden, rng)?;
        let w1 = glorot_init(hidden, classes, rng)?;
        Ok(Self {
            w0,
            b0: vec![0.0; hidden],
            w1,
            b1: vec![0.0; classes],
        })
    }

    pub fn zeros(features: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w0: DenseMatrix::zeros(features, hidden),
            b0: vec![0.0; hidden],
            w1: DenseMatrix::zeros(hidden, classes),
            b1: vec![0.0; classes],
        }
    }

    pub fn num_features(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w0.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.cols()
    }

    fn check_shapes(&self) -> Result<(), ModelError> {
        let (d, h) = self.w0.shape();
        if self.b0.len() != h || self.w1.rows() != h || self.b1.len() != self.w1.cols() {
            return Err(ModelError::ParamShape(format!(
                "W0 {d}x{h}, b0 {}, W1 {:?}, b1 {}",
                self.b0.len(),
                self.w1.shape(),
                self.b1.len()
            )));
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.w0.is_finite()
            && self.w1.is_finite()
            && self.b0.iter().chain(&self.b1).all(|v| v.is_finite())
    }
}

/// Gradients with the same layout as [`GcnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: DenseMatrix,
    pub b0: Vec<f64>,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_p: f64,
    pub hidden_width: usize,
    /// L2 penalty added to the first-layer weight gradient only.
    pub weight_decay: f64,
    pub use_bias: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            dropout_p: 0.5,
            hidden_width: 16,
            weight_decay: 5e-4,
            use_bias: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig(
                "epochs must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.hidden_width == 0 {
            return Err(ModelError::InvalidConfig(
                "hidden width must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Row distributions with their argmax label and maximum probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub probs: DenseMatrix,
    pub labels: Vec<usize>,
    pub scores: Vec<f64>,
}

impl Predictions {
    /// Argmax ties resolve to the lowest class index.
    pub fn from_probs(probs: DenseMatrix) -> Self {
        let mut labels = Vec::with_capacity(probs.rows());
        let mut scores = Vec::with_capacity(probs.rows());
        for r in 0..probs.rows() {
            let (label, score) =
                probs
                    .row(r)
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &p)| {
                        if p > best.1 {
                            (c, p)
                        } else {
                            best
                        }
                    });
            labels.push(label);
            scores.push(score);
        }
        Self {
            probs,
            labels,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Predictions restricted to the given rows, in that order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            probs: self.probs.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            scores: rows.iter().map(|&r| self.scores[r]).collect(),
        }
    }
}

pub enum Dropout<'a> {
    Off,
    On { p: f64, rng: &'a mut Rng },
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<'a> {
    input: Cow<'a, SparseRows>,
    pre_activation: DenseMatrix,
    hidden: DenseMatrix,
    hidden_mask: DropoutMask,
}

fn check_inputs(
    params: &GcnParams,
    propagator: &Propagator,
    x: &SparseRows,
) -> Result<(), ModelError> {
    params.check_shapes()?;
    if x.rows() != propagator.num_nodes() {
        return Err(ModelError::FeatureRows {
            expected: propagator.num_nodes(),
            found: x.rows(),
        });
    }
    if x.cols() != params.num_features() {
        return Err(ModelError::ParamShape(format!(
            "input has {} features, W0 expects {}",
            x.cols(),
            params.num_features()
        )));
    }
    Ok(())
}

fn forward_probs<'a>(
    params: &GcnParams,
    propagator: &Propagator,
    x: Cow<'a, SparseRows>,
    mode: Dropout<'_>,
) -> Result<(DenseMatrix, ForwardCache<'a>), ModelError> {
    check_inputs(params, propagator, &x)?;
    // the input mask is not kept: gradients with respect to X are never needed
    let (input, hidden_dropout) = match mode {
        Dropout::Off => (x, None),
        Dropout::On { p, rng } => (Cow::Owned(x.dropout(p, rng)?), Some((p, rng))),
    };

    let mut pre_activation = propagator.spmm(&input.matmul(&params.w0)?)?;
    pre_activation.add_row_vector(&params.b0)?;
    let activated = relu(&pre_activation);
    let (hidden, hidden_mask) = match hidden_dropout {
        Some((p, rng)) => dropout(&activated, p, rng, true)?,
        None => {
            let len = activated.as_slice().len();
            (activated, DropoutMask::all_kept(len))
        }
    };
    let mut logits = propagator.spmm(&hidden.matmul(&params.w1)?)?;
    logits.add_row_vector(&params.b1)?;
    let probs = softmax_rows(&logits);
    Ok((
        probs,
        ForwardCache {
            input,
            pre_activation,
            hidden,
            hidden_mask,
        },
    ))
}

/// Full forward pass. With [`Dropout::Off`] this is deterministic.
pub fn forward(
    params: &GcnParams,
    propagator: &Propagator,
    x: &DenseMatrix,
    mode: Dropout<'_>,
) -> Result<(Predictions, ForwardCache<'static>), ModelError> {
    let x = Cow::Owned(SparseRows::from_dense(x));
    let (probs, cache) = forward_probs(params, propagator, x, mode)?;
    Ok((Predictions::from_probs(probs), cache))
}

/// Backpropagates the gradient of the loss with respect to the logits.
/// `Â` is symmetric, so its transpose product is another `spmm`.
pub fn backward(
    params: &GcnParams,
    propagator: &Propagator,
    cache: &ForwardCache<'_>,
    grad_logits: &DenseMatrix,
) -> Result<Gradients, ModelError> {
    let b1 = grad_logits.column_sums();
    let grad_hw = propagator.spmm(grad_logits)?;
    let w1 = cache.hidden.transpose_matmul(&grad_hw)?;
    let grad_hidden = grad_hw.matmul_transpose(&params.w1)?;
    let grad_hidden = dropout_backward(&grad_hidden, &cache.hidden_mask)?;
    let grad_pre = relu_backward(&cache.pre_activation, &grad_hidden)?;
    let b0 = grad_pre.column_sums();
    let grad_xw = propagator.spmm(&grad_pre)?;
    let w0 = cache.input.transpose_matmul(&grad_xw)?;
    Ok(Gradients { w0, b0, w1, b1 })
}

/// Loss and parameter gradients in evaluation mode (no dropout). The loss
/// includes `weight_decay / 2 · ‖W0‖²`, matching the gradient term added in
/// training.
pub fn loss_and_gradients(
    params: &GcnParams,
    propagator: &Propagator,
    x: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
    weight_decay: f64,
) -> Result<(f64, Gradients), ModelError> {
    let x = Cow::Owned(SparseRows::from_dense(x));
    let (probs, cache) = forward_probs(params, propagator, x, Dropout::Off)?;
    let (loss, grad_logits) = cross_entropy_masked(&probs, labels, mask)?;
    let mut grads = backward(params, propagator, &cache, &grad_logits)?;
    let mut penalty = 0.0;
    for (g, &w) in grads.w0.as_mut_slice().iter_mut().zip(params.w0.as_slice()) {
        *g += weight_decay * w;
        penalty += w * w;
    }
    Ok((loss + 0.5 * weight_decay * penalty, grads))
}

/// Full-batch training for exactly `cfg.epochs` epochs from a fresh
/// initialization seeded by `cfg.seed`. `labels` is indexed by node; only
/// the nodes in `mask` are read. Mask order does not matter.
pub fn train(
    x: &DenseMatrix,
    propagator: &Propagator,
    labels: &[usize],
    mask: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<GcnParams, ModelError> {
    cfg.validate()?;
    let mut mask = mask.to_vec();
    mask.sort_unstable();
    mask.dedup();
    if mask.is_empty() {
        return Err(ModelError::EmptyLabeledSet);
    }

    let mut rng = Rng::new(cfg.seed);
    let mut params = GcnParams::init(x.cols(), cfg.hidden_width, num_classes, &mut rng)?;
    let x = SparseRows::from_dense(x);
    check_inputs(&params, propagator, &x)?;
    let mut opt_w0 = AdamState::new(params.w0.as_slice().len());
    let mut opt_b0 = AdamState::new(params.b0.len());
    let mut opt_w1 = AdamState::new(params.w1.as_slice().len());
    let mut opt_b1 = AdamState::new(params.b1.len());

    for epoch in 0..cfg.epochs {
        let mode = Dropout::On {
            p: cfg.dropout_p,
            rng: &mut rng,
        };
        let (probs, cache) = forward_probs(&params, propagator, Cow::Borrowed(&x), mode)?;
        let (loss, grad_logits) = cross_entropy_masked(&probs, labels, &mask)?;
        if !loss.is_finite() {
            return Err(ModelError::Diverged { epoch, loss });
        }
        let mut grads = backward(&params, propagator, &cache, &grad_logits)?;
        drop(cache);
        if cfg.weight_decay > 0.0 {
            for (g, &w) in grads.w0.as_mut_slice().iter_mut().zip(params.w0.as_slice()) {
                *g += cfg.weight_decay * w;
            }
        }
        let lr = cfg.learning_rate;
        let diverged = |e: NnError| match e {
            NnError::NonFiniteGradient { .. } => ModelError::Diverged { epoch, loss },
            other => other.into(),
        };
        adam_step(
            params.w0.as_mut_slice(),
            grads.w0.as_slice(),
            &mut opt_w0,
            lr,
        )
        .map_err(diverged)?;
        adam_step(
            params.w1.as_mut_slice(),
            grads.w1.as_slice(),
            &mut opt_w1,
            lr,
        )
        .map_err(diverged)?;
        if cfg.use_bias {
            adam_step(&mut params.b0, &grads.b0, &mut opt_b0, lr).map_err(diverged)?;
            adam_step(&mut params.b1, &grads.b1, &mut opt_b1, lr).map_err(diverged)?;
        }
        if !params.all_finite() {
            return Err(ModelError::Diverged { epoch, loss });
        }
    }
    Ok(params)
}

/// Training inputs of the supervised variant: only the labeled nodes, their
/// feature rows, and the subgraph they induce.
#[derive(Debug, Clone)]
pub struct SupervisedInputs {
    pub subset: NodeSubset,
    pub features: DenseMatrix,
    pub propagator: Propagator,
    pub labels: Vec<usize>,
}

impl SupervisedInputs {
    /// `labeled` holds `(node, label)` pairs in parent-graph indices.
    pub fn build(
        features: &DenseMatrix,
        graph: &SparseGraph,
        labeled: &[(usize, usize)],
    ) -> Result<Self, ModelError> {
        if labeled.is_empty() {
            return Err(ModelError::EmptyLabeledSet);
        }
        if features.rows() != graph.num_nodes() {
            return Err(ModelError::FeatureRows {
                expected: graph.num_nodes(),
                found: features.rows(),
            });
        }
        let mut pairs = labeled.to_vec();
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ModelError::DuplicateLabeledNode(w[0].0));
        }
        let subset = NodeSubset::new(pairs.iter().map(|p| p.0).collect(), graph.num_nodes())?;
        let propagator = graph.induced_subgraph(&subset)?.normalize();
        Ok(Self {
            features: features.select_rows(subset.nodes()),
            labels: pairs.iter().map(|p| p.1).collect(),
            subset,
            propagator,
        })
    }
}

/// Trains the supervised variant on the labeled-induced subgraph.
pub fn train_sgcn(
    features: &DenseMatrix,
    graph: &SparseGraph,
    labeled: &[(usize, usize)],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<GcnParams, ModelError> {
    let inputs = SupervisedInputs::build(features, graph, labeled)?;
    let mask: Vec<usize> = (0..inputs.subset.len()).collect();
    train(
        &inputs.features,
        &inputs.propagator,
        &inputs.labels,
        &mask,
        num_classes,
        cfg,
    )
}

/// Evaluation-mode forward pass.
pub fn predict(
    params: &GcnParams,
    propagator: &Propagator,
    x: &DenseMatrix,
) -> Result<Predictions, ModelError> {
    forward(params, propagator, x, Dropout::Off).map(|(p, _)| p)
}

/// Evaluation-mode predictions for the nodes of `subset`, propagating over
/// the subgraph they induce. Rows follow the subset's sorted order.
pub fn predict_on_subgraph(
    params: &GcnParams,
    features: &DenseMatrix,
    graph: &SparseGraph,
    subset: &NodeSubset,
) -> Result<Predictions, ModelError> {
    if features.rows() != graph.num_nodes() {
        return Err(ModelError::FeatureRows {
            expected: graph.num_nodes(),
            found: features.rows(),
        });
    }
    let propagator = graph.induced_subgraph(subset)?.normalize();
    let x = features.select_rows(subset.nodes());
    predict(params, &propagator, &x)
}
