mod common;

use safegcn::dataset;
use safegcn::harness::{
    self, ExperimentSpec, HarnessError, Method, SplitSource, AGGREGATE_MARKER, CSV_HEADER,
};
use safegcn::{Rng, TrainConfig};

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    }
}

fn blocks_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    dataset::save(&common::noisy_blocks(42), dir.path()).unwrap();
    dir
}

fn spec(dir: &tempfile::TempDir, methods: Vec<Method>, seeds: Vec<u64>) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(dir.path(), methods, seeds);
    spec.split = SplitSource::Random { test_size: 30 };
    spec.labels_per_class = Some(vec![3]);
    spec.train = quick();
    spec
}

fn csv_records(bytes: &[u8]) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes);
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn csv_is_byte_identical_across_runs() {
    println!("{}", common::checks::csv_determinism().unwrap());
}

#[test]
fn alpha_sweep_row_arithmetic_and_layout() {
    let dir = blocks_dir();
    let alphas = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let report =
        harness::sweep_alpha(&spec(&dir, vec![Method::SafeGcn], vec![0, 1, 2]), &alphas).unwrap();
    assert_eq!(report.rows.len(), 24);
    assert_eq!(report.aggregates.len(), 8);
    assert!(!report.has_errors());

    let mut out = Vec::new();
    report.write_csv(&mut out, true).unwrap();
    let records = csv_records(&out);
    assert_eq!(records[0], CSV_HEADER);
    assert_eq!(records.len(), 1 + 24 + 8);
    for (block, alpha) in alphas.iter().enumerate() {
        let rows = &records[1 + block * 4..1 + block * 4 + 4];
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[2].parse::<f64>().unwrap(), *alpha);
            if i < 3 {
                assert_eq!(row[4], i.to_string());
                let acc: f64 = row[5].parse().unwrap();
                assert!((0.0..=1.0).contains(&acc));
                assert!(row[6].parse::<usize>().unwrap() >= 1);
                assert!(row[8].parse::<f64>().unwrap() >= 0.0);
            } else {
                assert_eq!(row[4], AGGREGATE_MARKER);
            }
        }
    }
}

#[test]
fn aggregates_match_independent_statistics() {
    let dir = blocks_dir();
    let seeds: Vec<u64> = (0..5).collect();
    let report =
        harness::run_experiment(&spec(&dir, vec![Method::Gcn, Method::Sgcn], seeds)).unwrap();
    let mut out = Vec::new();
    report.write_csv(&mut out, false).unwrap();
    let records = csv_records(&out);
    for method in ["sgcn", "gcn"] {
        let accs: Vec<f64> = records
            .iter()
            .skip(1)
            .filter(|r| r[1] == method && r[4] != AGGREGATE_MARKER)
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert_eq!(accs.len(), 5);
        let (mean, std) = common::welford(&accs);
        let summary = records
            .iter()
            .find(|r| r[1] == method && r[4] == AGGREGATE_MARKER)
            .unwrap();
        let (m, s) = summary[5].split_once("+-").unwrap();
        assert!((m.parse::<f64>().unwrap() - mean).abs() < 1e-12, "{method}");
        assert!((s.parse::<f64>().unwrap() - std).abs() < 1e-12, "{method}");
        // blank timing column with timing off
        assert!(records.iter().skip(1).all(|r| r[8].is_empty()));
    }
}

#[test]
fn oversized_label_count_fails_only_its_rows() {
    let dir = blocks_dir();
    let report =
        harness::sweep_label_ratio(&spec(&dir, vec![Method::Gcn], vec![0, 1]), &[2, 41]).unwrap();
    assert!(report.has_errors());
    let (bad, good): (Vec<_>, Vec<_>) = report
        .rows
        .iter()
        .partition(|r| r.grid.labels_per_class == Some(41));
    assert!(bad.iter().all(|r| r.outcome.is_err()));
    assert!(good.iter().all(|r| r.outcome.is_ok()));
    let aggregate = report
        .aggregates
        .iter()
        .find(|a| a.grid.labels_per_class == Some(41))
        .unwrap();
    assert_eq!(aggregate.runs, 0);
}

#[test]
fn threshold_above_one_reproduces_the_sgcn_rows() {
    let dir = blocks_dir();
    let mut s = spec(&dir, vec![Method::Sgcn, Method::SafeGcn], vec![3, 4]);
    s.alphas = Some(vec![1.01]);
    let report = harness::run_experiment(&s).unwrap();
    for seed in [3, 4] {
        let acc = |m: Method| {
            report
                .rows
                .iter()
                .find(|r| r.grid.method == m && r.seed == seed)
                .unwrap()
                .outcome
                .as_ref()
                .unwrap()
                .accuracy
        };
        assert_eq!(acc(Method::Sgcn), acc(Method::SafeGcn));
    }
}

#[test]
fn fixed_split_file_is_used_verbatim() {
    let dir = blocks_dir();
    let ds = dataset::load(dir.path()).unwrap();
    let split = dataset::make_split(&ds, 2, 25, &mut Rng::new(77)).unwrap();
    let path = dir.path().join("split.json");
    dataset::save_split(&split, &path).unwrap();
    let mut s = ExperimentSpec::new(dir.path(), vec![Method::Sgcn], vec![0, 1]);
    s.split = SplitSource::Fixed(path);
    s.train = quick();
    let report = harness::run_experiment(&s).unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        let m = row.outcome.as_ref().unwrap();
        assert_eq!(m.pool_size, split.train_labeled().len());
        // 25 test nodes, so accuracy is a multiple of 1/25
        assert!(((m.accuracy * 25.0) - (m.accuracy * 25.0).round()).abs() < 1e-9);
    }
}

#[test]
fn empty_grids_are_rejected() {
    let dir = blocks_dir();
    let no_seeds = spec(&dir, vec![Method::Gcn], vec![]);
    assert!(matches!(
        harness::run_experiment(&no_seeds),
        Err(HarnessError::EmptyGrid(_))
    ));
    let no_methods = spec(&dir, vec![], vec![0]);
    assert!(matches!(
        harness::run_experiment(&no_methods),
        Err(HarnessError::EmptyGrid(_))
    ));
    let s = spec(&dir, vec![Method::SafeGcn], vec![0]);
    assert!(matches!(
        harness::sweep_alpha(&s, &[]),
        Err(HarnessError::EmptyGrid(_))
    ));
}

#[test]
fn expansion_log_has_one_line_per_iteration() {
    let dir = blocks_dir();
    let mut s = spec(&dir, vec![Method::SafeGcn], vec![0, 1]);
    s.alphas = Some(vec![0.5]);
    let report = harness::run_experiment(&s).unwrap();
    let mut out = Vec::new();
    report.write_expansion_logs(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let expected: usize = report.logs.iter().map(|(_, _, log)| log.iterations()).sum();
    assert_eq!(text.lines().count(), expected);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["iteration"].as_u64().unwrap() >= 1);
        assert_eq!(v["alpha"].as_f64().unwrap(), 0.5);
        assert!(v["pool_after"].as_u64() >= v["pool_before"].as_u64());
    }
}
