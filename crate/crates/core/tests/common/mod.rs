//! Independent reference computations and fixtures shared by the
//! integration suites. Nothing here calls into the library's kernels: the
//! dense oracle rebuilds the propagator from the edge list and evaluates the
//! model with plain nested loops.

#![allow(dead_code, clippy::needless_range_loop)]

pub mod checks;

use safegcn::dataset::{sbm_generate, SbmConfig};
use safegcn::model::GcnParams;
use safegcn::{Dataset, DenseMatrix, Rng, Split};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &DenseMatrix) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` from an undirected edge list.
pub fn dense_propagator(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for &(u, v) in edges {
        if u != v {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn add_bias(m: &mut Dense, bias: &[f64]) {
    for row in m.iter_mut() {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub fn softmax(m: &Dense) -> Dense {
    m.iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            exps.iter().map(|e| e / total).collect()
        })
        .collect()
}

/// Evaluation-mode class probabilities.
pub fn oracle_forward(
    a_hat: &Dense,
    x: &Dense,
    w0: &Dense,
    b0: &[f64],
    w1: &Dense,
    b1: &[f64],
) -> Dense {
    let mut z1 = matmul(a_hat, &matmul(x, w0));
    add_bias(&mut z1, b0);
    let h: Dense = z1
        .iter()
        .map(|row| row.iter().map(|v| v.max(0.0)).collect())
        .collect();
    let mut z2 = matmul(a_hat, &matmul(&h, w1));
    add_bias(&mut z2, b1);
    softmax(&z2)
}

pub fn oracle_params_forward(a_hat: &Dense, x: &Dense, p: &GcnParams) -> Dense {
    oracle_forward(a_hat, x, &to_dense(&p.w0), &p.b0, &to_dense(&p.w1), &p.b1)
}

/// Masked mean cross-entropy plus `weight_decay / 2 · ‖W0‖²`.
pub fn oracle_loss(
    a_hat: &Dense,
    x: &Dense,
    p: &GcnParams,
    labels: &[usize],
    mask: &[usize],
    weight_decay: f64,
) -> f64 {
    let probs = oracle_params_forward(a_hat, x, p);
    let nll: f64 = mask.iter().map(|&i| -probs[i][labels[i]].ln()).sum();
    let l2: f64 = p.w0.as_slice().iter().map(|w| w * w).sum();
    nll / mask.len() as f64 + 0.5 * weight_decay * l2
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.uniform_in(-scale, scale))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_edges(n: usize, p: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.uniform() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn random_params(d: usize, h: usize, c: usize, rng: &mut Rng) -> GcnParams {
    GcnParams {
        w0: random_matrix(d, h, 1.0, rng),
        b0: (0..h).map(|_| rng.uniform_in(-0.5, 0.5)).collect(),
        w1: random_matrix(h, c, 1.0, rng),
        b1: (0..c).map(|_| rng.uniform_in(-0.5, 0.5)).collect(),
    }
}

/// Two disjoint cliques of `per_class` nodes with features far apart.
pub fn two_cliques(per_class: usize) -> Dataset {
    let cfg = SbmConfig {
        classes: 2,
        nodes_per_class: per_class,
        p_in: 1.0,
        p_out: 0.0,
        feature_dim: 2,
        feature_shift: 10.0,
    };
    sbm_generate(&cfg, &mut Rng::new(11)).unwrap()
}

/// 12-node two-clique split: one seed per class, one test node per class,
/// ten training nodes in total.
pub fn two_clique_split() -> Split {
    Split::new(vec![0, 6], vec![1, 2, 3, 4, 7, 8, 9, 10], vec![5, 11])
}

/// A noisy block-model benchmark where graph structure matters.
pub fn noisy_blocks(seed: u64) -> Dataset {
    let cfg = SbmConfig {
        classes: 3,
        nodes_per_class: 40,
        p_in: 0.2,
        p_out: 0.02,
        feature_dim: 12,
        feature_shift: 0.8,
    };
    sbm_generate(&cfg, &mut Rng::new(seed)).unwrap()
}

/// Independent mean and sample standard deviation (Welford's update).
pub fn welford(values: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    (mean, (m2 / (values.len() as f64 - 1.0)).sqrt())
}
