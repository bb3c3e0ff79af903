//! Dataset ingestion: `edges.tsv`, `features.csv`, `labels.tsv`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Graph;
use crate::{Error, Result};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.tsv";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_id(path: &Path, line: usize, token: &str) -> Result<u64> {
    token
        .parse::<u64>()
        .map_err(|_| Error::parse(path, line, format!("expected a non-negative integer node id, got {token:?}")))
}

/// Loads a graph from a dataset directory.
///
/// The node universe is the set of ids listed in `labels.tsv`; ids are
/// remapped to `0..n` in ascending order and row `r` of `features.csv`
/// belongs to the `r`-th smallest id. Edges are symmetrized and deduplicated.
pub fn load_graph(dataset_dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dataset_dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }

    let labels_path = dir.join(LABELS_FILE);
    let mut labelled: Vec<(u64, usize, usize)> = Vec::new();
    for (line, text) in content_lines(&read(&labels_path)?) {
        let mut fields = text.split('\t');
        let (Some(node), Some(class), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(&labels_path, line, "expected `node_id<TAB>class_id`"));
        };
        let node = parse_id(&labels_path, line, node.trim())?;
        let class: i64 = class
            .trim()
            .parse()
            .map_err(|_| Error::parse(&labels_path, line, format!("invalid class id {class:?}")))?;
        if class < 0 || class > u32::MAX as i64 {
            return Err(Error::parse(&labels_path, line, format!("class id {class} out of range")));
        }
        labelled.push((node, class as usize, line));
    }
    labelled.sort_by_key(|&(node, _, _)| node);
    if let Some(w) = labelled.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::parse(
            &labels_path,
            w[1].2.max(w[0].2),
            format!("node {} labelled twice", w[0].0),
        ));
    }
    let original_ids: Vec<u64> = labelled.iter().map(|&(node, _, _)| node).collect();
    let labels: Vec<usize> = labelled.iter().map(|&(_, class, _)| class).collect();
    let index: HashMap<u64, usize> = original_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let edges_path = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    for (line, text) in content_lines(&read(&edges_path)?) {
        let mut fields = text.split_whitespace();
        let (Some(u), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(&edges_path, line, "expected two node ids"));
        };
        let u = parse_id(&edges_path, line, u)?;
        let v = parse_id(&edges_path, line, v)?;
        let lookup = |id: u64| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::parse(&edges_path, line, format!("node {id} has no label")))
        };
        edges.push((lookup(u)?, lookup(v)?));
    }

    let features_path = dir.join(FEATURES_FILE);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, text) in content_lines(&read(&features_path)?) {
        let row = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(&features_path, line, format!("invalid feature value {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    &features_path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.len() != labels.len() {
        return Err(Error::parse(
            &features_path,
            rows.len(),
            format!("{} feature rows for {} labelled nodes", rows.len(), labels.len()),
        ));
    }
    let dim = rows.first().map_or(0, Vec::len);
    let features = Array2::from_shape_vec((rows.len(), dim), rows.into_iter().flatten().collect())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;

    Ok(Graph::from_edges(&edges, features, labels)?.with_original_ids(original_ids))
}

impl Graph {
    /// Writes the dense-to-original id mapping as `dense<TAB>original` lines.
    pub fn write_node_map(&self, path: impl AsRef<Path>) -> Result<()> {
        let path: PathBuf = path.as_ref().into();
        let mut out = Vec::new();
        for v in 0..self.num_nodes() {
            writeln!(out, "{v}\t{}", self.original_id(v)).expect("write to vec");
        }
        fs::write(&path, out).map_err(|e| Error::io(path, e))
    }
}
