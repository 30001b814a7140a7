//! Property criteria as reusable checks. Each returns a one-line summary on
//! success and a description of the first violation otherwise.

use std::collections::{BTreeMap, BTreeSet};

use safegcn::harness::{self, ExperimentSpec, Method, SplitSource};
use safegcn::model::{self, loss_and_gradients, GcnParams, TrainConfig};
use safegcn::nn::mix_seed;
use safegcn::safe_gcn::{self, Provenance, SafeGcnConfig};
use safegcn::{dataset, Dataset, NodeSubset, Rng, SparseGraph, Split};

use super::*;

pub type Check = Result<String, String>;

/// Forward pass against the dense oracle on random graphs with `n ≤ 20`.
pub fn forward_oracle(instances: usize, seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let n = 1 + (rng.uniform() * 20.0) as usize;
        let d = 1 + (rng.uniform() * 6.0) as usize;
        let h = 1 + (rng.uniform() * 5.0) as usize;
        let c = 2 + (rng.uniform() * 3.0) as usize;
        let edges = random_edges(n, rng.uniform(), &mut rng);
        let x = random_matrix(n, d, 2.0, &mut rng);
        let params = random_params(d, h, c, &mut rng);
        let graph = SparseGraph::from_edges(n, &edges).map_err(|e| e.to_string())?;
        let got = model::predict(&params, &graph.normalize(), &x).map_err(|e| e.to_string())?;
        let want = oracle_params_forward(&dense_propagator(n, &edges), &to_dense(&x), &params);
        for i in 0..n {
            for j in 0..c {
                let err = (got.probs.get(i, j) - want[i][j]).abs();
                worst = worst.max(err);
                if err >= 1e-10 {
                    return Err(format!(
                        "case {case} ({n} nodes) entry ({i},{j}): error {err:e}"
                    ));
                }
            }
        }
    }
    Ok(format!("{instances} instances, max abs error {worst:.2e}"))
}

/// Central finite differences of the oracle loss against the analytic
/// gradients on a 10-node graph, dropout off.
pub fn gradient_check(seed: u64) -> Check {
    const H: f64 = 1e-5;
    let mut rng = Rng::new(seed);
    let n = 10;
    let (d, hidden, c) = (5, 4, 3);
    let mut edges = random_edges(n, 0.35, &mut rng);
    edges.push((0, 9));
    let graph = SparseGraph::from_edges(n, &edges).map_err(|e| e.to_string())?;
    let a_hat = dense_propagator(n, &edges);
    let x = random_matrix(n, d, 1.0, &mut rng);
    let xd = to_dense(&x);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mask = vec![0, 2, 3, 5, 8];
    let decay = 5e-4;
    let params = random_params(d, hidden, c, &mut rng);

    let (_, grads) = loss_and_gradients(&params, &graph.normalize(), &x, &labels, &mask, decay)
        .map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = grads
        .w0
        .as_slice()
        .iter()
        .chain(&grads.b0)
        .chain(grads.w1.as_slice())
        .chain(&grads.b1)
        .copied()
        .collect();

    let flat_len = analytic.len();
    let perturbed = |index: usize, delta: f64| -> GcnParams {
        let mut p = params.clone();
        let mut i = index;
        let w0 = p.w0.as_mut_slice();
        if i < w0.len() {
            w0[i] += delta;
            return p;
        }
        i -= w0.len();
        if i < p.b0.len() {
            p.b0[i] += delta;
            return p;
        }
        i -= p.b0.len();
        let w1 = p.w1.as_mut_slice();
        if i < w1.len() {
            w1[i] += delta;
            return p;
        }
        i -= w1.len();
        p.b1[i] += delta;
        p
    };

    let mut worst: f64 = 0.0;
    for (index, &a) in analytic.iter().enumerate() {
        let plus = oracle_loss(&a_hat, &xd, &perturbed(index, H), &labels, &mask, decay);
        let minus = oracle_loss(&a_hat, &xd, &perturbed(index, -H), &labels, &mask, decay);
        let numeric = (plus - minus) / (2.0 * H);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        if rel >= 1e-4 {
            return Err(format!(
                "entry {index}: analytic {a:e}, numeric {numeric:e}, relative error {rel:e}"
            ));
        }
    }
    Ok(format!(
        "{flat_len} parameters, max relative error {worst:.2e}"
    ))
}

fn fast_config() -> TrainConfig {
    TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    }
}

/// Replays every iteration from the recorded pool and checks the filter,
/// the class balance and the ranking independently of the library's
/// selection code.
fn replay_iterations(
    ds: &Dataset,
    split: &Split,
    cfg: &SafeGcnConfig,
    outcome: &safe_gcn::SafeGcnOutcome,
) -> Result<(), String> {
    let classes = ds.num_classes();
    let train = NodeSubset::new(split.train_nodes(), ds.num_nodes()).unwrap();
    let prop = ds.graph().induced_subgraph(&train).unwrap().normalize();
    let x = ds.features().select_rows(train.nodes());
    let entries = outcome.pool.entries();

    for record in &outcome.log.records {
        let k = record.iteration;
        let pool: BTreeMap<usize, usize> = entries
            .iter()
            .filter(|e| e.iteration_added < k)
            .map(|e| (e.node, e.label))
            .collect();
        if pool.len() != record.pool_before {
            return Err(format!(
                "iteration {k}: pool size {} != {}",
                pool.len(),
                record.pool_before
            ));
        }
        let pairs: Vec<(usize, usize)> = pool.iter().map(|(&n, &l)| (n, l)).collect();
        let base = cfg.train.seed;
        let sgcn = model::train_sgcn(
            ds.features(),
            ds.graph(),
            &pairs,
            classes,
            &cfg.train.with_seed(mix_seed(base, 2 * k as u64)),
        )
        .map_err(|e| e.to_string())?;
        let mut local_labels = vec![0; train.len()];
        let mut mask = Vec::new();
        for &(n, l) in &pairs {
            let i = train.local_index(n).unwrap();
            local_labels[i] = l;
            mask.push(i);
        }
        let gcn = model::train(
            &x,
            &prop,
            &local_labels,
            &mask,
            classes,
            &cfg.train.with_seed(mix_seed(base, 2 * k as u64 + 1)),
        )
        .map_err(|e| e.to_string())?;
        let fs = model::predict(&sgcn, &prop, &x).unwrap();
        let fg = model::predict(&gcn, &prop, &x).unwrap();

        let mut candidates: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
        for (i, &node) in train.nodes().iter().enumerate() {
            if pool.contains_key(&node) {
                continue;
            }
            let (ls, lg) = (fs.labels[i], fg.labels[i]);
            if ls == lg && fg.scores[i] >= fs.scores[i] && fs.scores[i] >= cfg.alpha {
                candidates.entry(lg).or_default().push((fg.scores[i], node));
            }
        }
        let histogram: BTreeMap<usize, usize> =
            candidates.iter().map(|(&c, v)| (c, v.len())).collect();
        if histogram != record.histogram {
            return Err(format!(
                "iteration {k}: histogram {histogram:?} != {:?}",
                record.histogram
            ));
        }
        let s = histogram.values().min().copied().unwrap_or(0);
        if s != record.admitted_per_class {
            return Err(format!(
                "iteration {k}: s = {s}, recorded {}",
                record.admitted_per_class
            ));
        }
        for (class, list) in candidates.iter_mut() {
            list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let want: BTreeSet<usize> = list[..s].iter().map(|&(_, n)| n).collect();
            let got: BTreeSet<usize> = record.admitted[class].iter().copied().collect();
            if want != got {
                return Err(format!(
                    "iteration {k} class {class}: admitted {got:?}, expected {want:?}"
                ));
            }
            if record.admitted[class].len() != s {
                return Err(format!("iteration {k} class {class}: unbalanced admission"));
            }
        }
        for entry in entries.iter().filter(|e| e.iteration_added == k) {
            let i = train.local_index(entry.node).unwrap();
            let (g, sg) = (entry.gcn_score.unwrap(), entry.sgcn_score.unwrap());
            if entry.label != fg.labels[i] || entry.label != fs.labels[i] {
                return Err(format!(
                    "node {} pseudo-label disagrees with the models",
                    entry.node
                ));
            }
            if !(g >= sg && sg >= cfg.alpha) || g != fg.scores[i] || sg != fs.scores[i] {
                return Err(format!(
                    "node {} violates the filter ({g}, {sg})",
                    entry.node
                ));
            }
        }
    }
    Ok(())
}

/// Monotonicity, balance, soundness, leakage, termination and the
/// degenerate-threshold equivalence on a family of block-model instances.
pub fn algorithm_invariants() -> Check {
    let mut iterations_seen = 0;
    let mut admitted_seen = 0;
    for (instance, alpha) in [(1u64, 0.4), (2, 0.6), (3, 0.5), (4, 0.75)] {
        let ds = noisy_blocks(instance);
        let split = dataset::make_split(&ds, 3, 30, &mut Rng::new(instance + 100))
            .map_err(|e| e.to_string())?;
        let cfg = SafeGcnConfig {
            alpha,
            max_iterations: 100,
            train: fast_config().with_seed(instance),
        };
        let outcome = safe_gcn::run(&ds, &split, &cfg).map_err(|e| e.to_string())?;
        let records = &outcome.log.records;
        iterations_seen += records.len();

        // monotone growth, seeds kept, pseudo-labels only from the unlabeled set
        let mut previous = split.train_labeled().len();
        for r in records {
            if r.pool_before != previous || r.pool_after != r.pool_before + r.admitted_total() {
                return Err(format!(
                    "instance {instance}: pool sizes not monotone at {}",
                    r.iteration
                ));
            }
            previous = r.pool_after;
            admitted_seen += r.admitted_total();
        }
        if outcome.pool.len() != previous {
            return Err(format!(
                "instance {instance}: final pool {} != {previous}",
                outcome.pool.len()
            ));
        }
        let unlabeled: BTreeSet<usize> = split.train_unlabeled().iter().copied().collect();
        for entry in outcome.pool.entries() {
            let ok = match entry.provenance {
                Provenance::Seed => split.train_labeled().contains(&entry.node),
                Provenance::Pseudo => unlabeled.contains(&entry.node),
            };
            if !ok {
                return Err(format!(
                    "instance {instance}: node {} has the wrong origin",
                    entry.node
                ));
            }
        }
        // test nodes never enter the pool
        if let Some(&t) = split.test().iter().find(|&&t| outcome.pool.contains(t)) {
            return Err(format!(
                "instance {instance}: test node {t} leaked into the pool"
            ));
        }
        let bound = cfg.max_iterations.min(split.train_unlabeled().len() + 1);
        if records.len() > bound {
            return Err(format!(
                "instance {instance}: {} iterations > {bound}",
                records.len()
            ));
        }
        replay_iterations(&ds, &split, &cfg, &outcome)
            .map_err(|e| format!("instance {instance}: {e}"))?;

        // test-node features and edges cannot influence the expansion
        let mut features = ds.features().clone();
        for &t in split.test() {
            for v in features.row_mut(t) {
                *v = 1e3;
            }
        }
        let mut edges: Vec<(usize, usize)> = ds.graph().edges().collect();
        for &t in split.test() {
            for u in split.train_nodes().into_iter().take(15) {
                if !ds.graph().has_edge(t, u) {
                    edges.push((t.min(u), t.max(u)));
                }
            }
        }
        let graph = SparseGraph::from_edges(ds.num_nodes(), &edges).unwrap();
        let tampered = Dataset::new(
            ds.name(),
            features,
            ds.labels().to_vec(),
            graph,
            ds.num_classes(),
        )
        .map_err(|e| e.to_string())?;
        let other = safe_gcn::run(&tampered, &split, &cfg).map_err(|e| e.to_string())?;
        if other.pool != outcome.pool || other.log != outcome.log {
            return Err(format!(
                "instance {instance}: test nodes changed the expansion"
            ));
        }
    }
    if admitted_seen == 0 {
        return Err("no instance admitted any pseudo-label; the suite is vacuous".into());
    }

    // a small cap stops the loop early
    let ds = noisy_blocks(1);
    let split = dataset::make_split(&ds, 3, 30, &mut Rng::new(101)).unwrap();
    for cap in [1, 2] {
        let cfg = SafeGcnConfig {
            alpha: 0.4,
            max_iterations: cap,
            train: fast_config().with_seed(1),
        };
        let outcome = safe_gcn::run(&ds, &split, &cfg).map_err(|e| e.to_string())?;
        if outcome.log.records.len() > cap {
            return Err(format!("cap {cap} exceeded"));
        }
    }

    // a threshold above 1 admits nothing and reduces to the S-GCN baseline
    for seed in [0, 7] {
        let ds = noisy_blocks(seed + 20);
        let split = dataset::make_split(&ds, 3, 30, &mut Rng::new(seed)).unwrap();
        let train = fast_config().with_seed(seed);
        let cfg = SafeGcnConfig {
            alpha: 1.01,
            max_iterations: 100,
            train,
        };
        let outcome = safe_gcn::run(&ds, &split, &cfg).map_err(|e| e.to_string())?;
        let seeds: Vec<(usize, usize)> = split
            .train_labeled()
            .iter()
            .map(|&n| (n, ds.labels()[n]))
            .collect();
        let baseline =
            model::train_sgcn(ds.features(), ds.graph(), &seeds, ds.num_classes(), &train)
                .map_err(|e| e.to_string())?;
        if outcome.params != baseline || outcome.pool.len() != seeds.len() {
            return Err(format!(
                "seed {seed}: alpha 1.01 differs from the S-GCN baseline"
            ));
        }
        let a = safe_gcn::final_predict(&outcome.params, &ds, &outcome.pool, split.test()).unwrap();
        let b = safe_gcn::predict_with_context(&baseline, &ds, split.train_labeled(), split.test())
            .unwrap();
        let same_bits = a
            .probs
            .as_slice()
            .iter()
            .zip(b.probs.as_slice())
            .all(|(p, q)| p.to_bits() == q.to_bits());
        if !same_bits {
            return Err(format!(
                "seed {seed}: alpha 1.01 predictions differ bitwise"
            ));
        }
    }
    Ok(format!(
        "4 instances, {iterations_seen} iterations replayed, {admitted_seen} pseudo-labels audited"
    ))
}

/// Two disjoint cliques, one seed per class: every training node ends up
/// pseudo-labeled with its true class.
pub fn separable_end_to_end() -> Check {
    let ds = two_cliques(6);
    let split = two_clique_split();
    let cfg = SafeGcnConfig::default();
    let outcome = safe_gcn::run(&ds, &split, &cfg).map_err(|e| e.to_string())?;
    let train: BTreeSet<usize> = split.train_nodes().into_iter().collect();
    let pooled: BTreeSet<usize> = outcome.pool.nodes().collect();
    if pooled != train {
        return Err(format!(
            "pool {pooled:?} after {} iterations does not cover {train:?}",
            outcome.log.iterations()
        ));
    }
    if let Some(e) = outcome
        .pool
        .entries()
        .iter()
        .find(|e| e.label != ds.labels()[e.node])
    {
        return Err(format!(
            "node {} pseudo-labeled {} but is class {}",
            e.node,
            e.label,
            ds.labels()[e.node]
        ));
    }
    let preds = safe_gcn::final_predict(&outcome.params, &ds, &outcome.pool, split.test()).unwrap();
    let acc = safe_gcn::accuracy(&preds, split.test(), ds.labels());
    Ok(format!(
        "pool {} / {} after {} iterations, test accuracy {acc}",
        pooled.len(),
        train.len(),
        outcome.log.iterations()
    ))
}

/// Runs a small grid twice and compares the CSV bytes with timing off.
pub fn csv_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = noisy_blocks(42);
    dataset::save(&ds, dir.path()).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(
        dir.path(),
        vec![Method::Sgcn, Method::Gcn, Method::SafeGcn],
        vec![3, 1, 2],
    );
    spec.alphas = Some(vec![0.5, 0.7]);
    spec.labels_per_class = Some(vec![2, 4]);
    spec.split = SplitSource::Random { test_size: 30 };
    spec.train = fast_config();

    let render = |spec: &ExperimentSpec| -> Result<Vec<u8>, String> {
        let report = harness::run_experiment(spec).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        report
            .write_csv(&mut out, false)
            .map_err(|e| e.to_string())?;
        Ok(out)
    };
    let first = render(&spec)?;
    let second = render(&spec)?;
    spec.seeds.reverse();
    let reordered = render(&spec)?;
    if first != second || first != reordered {
        return Err("CSV bytes differ between identical runs".into());
    }
    let lines = first.iter().filter(|&&b| b == b'\n').count();
    Ok(format!(
        "{} bytes, {lines} lines identical across three runs",
        first.len()
    ))
}
