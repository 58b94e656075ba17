//! Dataset directories.
//!
//! ```text
//! <dir>/edges.txt              u v per line, undirected
//! <dir>/features.csv           one comma-separated row per node
//! <dir>/labels.txt             one class index per line
//! <dir>/meta.txt               num_nodes, num_classes, feature_dim (+ extras)
//! <dir>/splits/<name>/{train,val,test}.txt   optional node index lists
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::parse::{parse_edges, parse_features, parse_index_list, parse_labels, parse_meta};
use crate::error::{Error, Result};
use crate::graph::{Graph, MaskKind, Masks};

pub const EDGES: &str = "edges.txt";
pub const FEATURES: &str = "features.csv";
pub const LABELS: &str = "labels.txt";
pub const META: &str = "meta.txt";
pub const SPLITS: &str = "splits";

/// Raw file contents of one dataset.
#[derive(Debug, Clone, Copy)]
pub struct DatasetTexts<'a> {
    pub edges: &'a str,
    pub features: &'a str,
    pub labels: &'a str,
    pub meta: &'a str,
    /// train, val, test index lists
    pub split: Option<[&'a str; 3]>,
}

fn check_rows(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::RowCountMismatch { what: what.to_string(), expected, found })
    }
}

/// Parses and validates a dataset held in memory.
pub fn graph_from_texts(texts: &DatasetTexts<'_>) -> Result<Graph> {
    let meta = parse_meta(texts.meta, META)?;
    let n = meta.num_nodes;
    let features = parse_features(texts.features, FEATURES)?;
    check_rows(FEATURES, n, features.nrows())?;
    if n > 0 {
        check_rows("feature columns", meta.feature_dim, features.ncols())?;
    }
    let features = if n == 0 { ndarray::Array2::zeros((0, meta.feature_dim)) } else { features };
    let labels = parse_labels(texts.labels, LABELS)?;
    check_rows(LABELS, n, labels.len())?;
    if let Some(&c) = labels.iter().find(|&&c| c >= meta.num_classes) {
        return Err(Error::IndexOutOfRange { what: "class label", index: c, bound: meta.num_classes });
    }
    let edges = parse_edges(texts.edges, EDGES)?;
    for &(u, v) in &edges {
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { what: "edge endpoint", index: idx, bound: n });
            }
        }
    }
    let mut masks = Masks::empty(n);
    if let Some(split) = texts.split {
        for (kind, text) in [MaskKind::Train, MaskKind::Val, MaskKind::Test].into_iter().zip(split) {
            let file = format!("{}.txt", kind.name());
            let mask = match kind {
                MaskKind::Train => &mut masks.train,
                MaskKind::Val => &mut masks.val,
                MaskKind::Test => &mut masks.test,
            };
            for idx in parse_index_list(text, &file)? {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { what: "split index", index: idx, bound: n });
                }
                mask[idx] = true;
            }
        }
    }
    Graph::from_undirected(features, &edges, labels, meta.num_classes, masks)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    pub source: PathBuf,
    /// Files read, relative to `source`, in checksum order.
    pub files: Vec<PathBuf>,
    /// Extra `meta.txt` keys, e.g. construction parameters.
    pub params: BTreeMap<String, String>,
    /// Hex SHA-256 over the files in `files`.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: Graph,
    pub meta: DatasetMeta,
}

fn read(dir: &Path, rel: &Path) -> Result<String> {
    let path = dir.join(rel);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

fn dataset_files(split: Option<&str>) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = [META, EDGES, FEATURES, LABELS].iter().map(PathBuf::from).collect();
    if let Some(name) = split {
        for kind in ["train", "val", "test"] {
            files.push(Path::new(SPLITS).join(name).join(format!("{kind}.txt")));
        }
    }
    files
}

/// SHA-256 over `(relative path, length, bytes)` of each file.
pub fn checksum(dir: &Path, files: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for rel in files {
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Loads `dir`, with masks from `splits/<split>/` when a split is named.
pub fn load_dataset(dir: &Path, split: Option<&str>) -> Result<DatasetBundle> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let files = dataset_files(split);
    let texts: Vec<String> = files.iter().map(|f| read(dir, f)).collect::<Result<_>>()?;
    let split_texts = split.map(|_| [texts[4].as_str(), texts[5].as_str(), texts[6].as_str()]);
    let graph = graph_from_texts(&DatasetTexts {
        meta: &texts[0],
        edges: &texts[1],
        features: &texts[2],
        labels: &texts[3],
        split: split_texts,
    })?;
    let params = parse_meta(&texts[0], META)?.extra;
    let name = params
        .get("name")
        .cloned()
        .or_else(|| dir.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let checksum = checksum(dir, &files)?;
    Ok(DatasetBundle { graph, meta: DatasetMeta { name, source: dir.to_path_buf(), files, params, checksum } })
}

/// True when the files on disk still hash to the recorded checksum.
pub fn verify_checksum(meta: &DatasetMeta) -> Result<bool> {
    Ok(checksum(&meta.source, &meta.files)? == meta.checksum)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rows of `m` as comma-separated shortest round-trip reals.
pub fn format_matrix(m: &ndarray::Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

fn index_lines(mask: &[bool]) -> String {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(v, _)| format!("{v}\n")).collect()
}

/// Writes `graph` to `dir`. Edges are written once per unordered pair, so a
/// graph with one-directional edges is symmetrized on reload. Masks go to
/// `splits/<split>/` when any is non-empty.
pub fn save_dataset(graph: &Graph, dir: &Path, params: &BTreeMap<String, String>, split: &str) -> Result<()> {
    let mut meta = format!(
        "num_nodes={}\nnum_classes={}\nfeature_dim={}\n",
        graph.num_nodes(),
        graph.num_classes(),
        graph.feature_dim()
    );
    for (k, v) in params {
        let _ = writeln!(meta, "{k}={v}");
    }
    write(&dir.join(META), &meta)?;
    let mut pairs: Vec<(usize, usize)> = graph.edges().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    pairs.sort_unstable();
    pairs.dedup();
    write(&dir.join(EDGES), &pairs.iter().map(|(u, v)| format!("{u} {v}\n")).collect::<String>())?;
    write(&dir.join(FEATURES), &format_matrix(graph.features()))?;
    write(&dir.join(LABELS), &graph.labels().iter().map(|c| format!("{c}\n")).collect::<String>())?;
    let masks = graph.masks();
    if [&masks.train, &masks.val, &masks.test].iter().any(|m| m.iter().any(|&b| b)) {
        let base = dir.join(SPLITS).join(split);
        write(&base.join("train.txt"), &index_lines(&masks.train))?;
        write(&base.join("val.txt"), &index_lines(&masks.val))?;
        write(&base.join("test.txt"), &index_lines(&masks.test))?;
    }
    Ok(())
}
