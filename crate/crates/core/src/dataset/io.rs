use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Split};
use crate::graph::SparseGraph;
use crate::nn::DenseMatrix;

const META: &str = "meta.json";
const FEATURES: &str = "features.txt";
const LABELS: &str = "labels.txt";
const EDGES: &str = "edges.txt";
pub(crate) const SPLIT: &str = "split.json";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    name: String,
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    train_labeled: Vec<usize>,
    train_unlabeled: Vec<usize>,
    test: Vec<usize>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a whitespace-separated record file line by line. `visit` receives
/// the 1-based line number and the fields.
fn read_records<F>(dir: &Path, file: &str, arity: usize, mut visit: F) -> Result<(), DatasetError>
where
    F: FnMut(usize, &[&str]) -> Result<(), String>,
{
    let path = dir.join(file);
    let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err(&path))?;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != arity {
            return Err(parse_err(
                file,
                line_no,
                format!("expected {arity} fields, found {}", fields.len()),
            ));
        }
        visit(line_no, &fields).map_err(|m| parse_err(file, line_no, m))?;
    }
    Ok(())
}

fn field<T: FromStr>(raw: &str, what: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("cannot parse {what} from {raw:?}"))
}

fn check_index(value: usize, bound: usize, what: &str) -> Result<usize, String> {
    if value >= bound {
        Err(format!("{what} {value} out of range (limit {bound})"))
    } else {
        Ok(value)
    }
}

fn read_meta(dir: &Path) -> Result<Meta, DatasetError> {
    let path = dir.join(META);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(META, e.line(), e.to_string()))
}

/// Loads and validates a dataset directory.
pub fn load(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let (n, d, c) = (meta.num_nodes, meta.num_features, meta.num_classes);

    let mut features = DenseMatrix::zeros(n, d);
    let mut last: Option<(usize, usize)> = None;
    read_records(dir, FEATURES, 3, |_, f| {
        let node = check_index(field(f[0], "node")?, n, "node")?;
        let feat = check_index(field(f[1], "feature")?, d, "feature")?;
        let value: f64 = field(f[2], "value")?;
        if !value.is_finite() {
            return Err(format!("non-finite value {value}"));
        }
        if last.is_some_and(|prev| prev >= (node, feat)) {
            return Err(format!(
                "entry ({node}, {feat}) is out of order or repeated"
            ));
        }
        last = Some((node, feat));
        features.set(node, feat, value);
        Ok(())
    })?;

    let mut labels = Vec::with_capacity(n);
    read_records(dir, LABELS, 2, |_, f| {
        let node: usize = field(f[0], "node")?;
        if node != labels.len() {
            return Err(format!("expected node {}, found {node}", labels.len()));
        }
        check_index(node, n, "node")?;
        labels.push(check_index(field(f[1], "label")?, c, "label")?);
        Ok(())
    })?;
    if labels.len() != n {
        return Err(parse_err(
            LABELS,
            labels.len() + 1,
            format!("{} labels for {n} nodes", labels.len()),
        ));
    }

    let mut edges = Vec::new();
    read_records(dir, EDGES, 2, |_, f| {
        let u = check_index(field(f[0], "node")?, n, "node")?;
        let v = check_index(field(f[1], "node")?, n, "node")?;
        if u >= v {
            return Err(format!("edge ({u}, {v}) must satisfy u < v"));
        }
        if edges.last().is_some_and(|&prev| prev >= (u, v)) {
            return Err(format!("edge ({u}, {v}) is out of order or repeated"));
        }
        edges.push((u, v));
        Ok(())
    })?;

    let graph = SparseGraph::from_edges(n, &edges)?;
    Dataset::new(meta.name, features, labels, graph, c)
}

/// Writes `value` so that parsing it back yields the same `f64`.
fn format_real(value: f64) -> String {
    let s = value.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, DatasetError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Writes the canonical directory, creating it if needed.
pub fn save(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let meta = Meta {
        name: dataset.name().to_string(),
        num_nodes: dataset.num_nodes(),
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes(),
    };
    let path = dir.join(META);
    let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;

    let write_all =
        |file: &str, body: &mut dyn FnMut(&mut BufWriter<File>) -> std::io::Result<()>| {
            let path: PathBuf = dir.join(file);
            let mut out = create(&path)?;
            body(&mut out)
                .and_then(|_| out.flush())
                .map_err(io_err(&path))
        };

    let x = dataset.features();
    write_all(FEATURES, &mut |out| {
        for node in 0..x.rows() {
            for (feat, &v) in x.row(node).iter().enumerate() {
                if v != 0.0 {
                    writeln!(out, "{node} {feat} {}", format_real(v))?;
                }
            }
        }
        Ok(())
    })?;
    write_all(LABELS, &mut |out| {
        for (node, label) in dataset.labels().iter().enumerate() {
            writeln!(out, "{node} {label}")?;
        }
        Ok(())
    })?;
    write_all(EDGES, &mut |out| {
        for (u, v) in dataset.graph().edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    })
}

/// Reads a fixed split file and validates it against `num_nodes`.
pub fn load_split(path: impl AsRef<Path>, num_nodes: usize) -> Result<Split, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file_name = path
        .file_name()
        .map_or_else(|| SPLIT.to_string(), |f| f.to_string_lossy().into_owned());
    let raw: SplitFile =
        serde_json::from_str(&text).map_err(|e| parse_err(&file_name, e.line(), e.to_string()))?;
    let split = Split::new(raw.train_labeled, raw.train_unlabeled, raw.test);
    split.validate(num_nodes)?;
    Ok(split)
}

pub fn save_split(split: &Split, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let raw = SplitFile {
        train_labeled: split.train_labeled().to_vec(),
        train_unlabeled: split.train_unlabeled().to_vec(),
        test: split.test().to_vec(),
    };
    let mut text = serde_json::to_string(&raw).expect("split serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}
