//! Immutable attributed graphs, adjacency normalizations and class splits.

mod io;
mod split;
mod synthetic;

use ndarray::{Array2, ArrayView1};

pub use io::load_graph;
pub use split::{load_class_split, ClassSplit};
pub use synthetic::{generate_planted_partition, PlantedPartition};

use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                sums[c] += v;
            }
        }
        sums
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                dense[[r, c]] += v;
            }
        }
        dense
    }
}

/// Undirected attributed graph with per-node class labels.
///
/// Adjacency is stored symmetric without self-loops or duplicate entries, and
/// neighbor lists are sorted by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph from an undirected edge list with unit weights.
    ///
    /// Edges are symmetrized, duplicates collapse, self-loops are dropped.
    pub fn from_edges(
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let weighted: Vec<(usize, usize, f64)> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::from_weighted_edges(&weighted, features, labels)
    }

    /// Weighted variant of [`Graph::from_edges`]. A duplicated pair keeps the
    /// weight of its first occurrence.
    pub fn from_weighted_edges(
        edges: &[(usize, usize, f64)],
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if u == v {
                continue;
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in &mut adjacency {
            // stable sort keeps the first occurrence of a duplicate first
            list.sort_by_key(|&(v, _)| v);
            list.dedup_by_key(|&mut (v, _)| v);
            for &(v, w) in list.iter() {
                neighbors.push(v);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Ok(Graph {
            offsets,
            neighbors,
            weights,
            features,
            labels,
            num_classes,
            original_ids: (0..n as u64).collect(),
        })
    }

    pub(crate) fn with_original_ids(mut self, ids: Vec<u64>) -> Self {
        debug_assert_eq!(ids.len(), self.num_nodes());
        self.original_ids = ids;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.features.row(v)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    /// Id of node `v` in the source files it was loaded from.
    pub fn original_id(&self, v: usize) -> u64 {
        self.original_ids[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn neighbor_weights(&self, v: usize) -> &[f64] {
        &self.weights[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.neighbor_weights(v).iter().sum()
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        match self.neighbors(u).binary_search(&v) {
            Ok(pos) => self.neighbor_weights(u)[pos],
            Err(_) => 0.0,
        }
    }

    /// Nodes carrying class `c`, ascending.
    pub fn nodes_of_class(&self, c: usize) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.labels[v] == c).collect()
    }

    pub fn adjacency(&self) -> SparseMatrix {
        SparseMatrix {
            n_rows: self.num_nodes(),
            n_cols: self.num_nodes(),
            offsets: self.offsets.clone(),
            indices: self.neighbors.clone(),
            values: self.weights.clone(),
        }
    }

    /// `A D^-1`: column `j` is divided by the weighted degree of `j`.
    /// Columns of isolated nodes stay zero.
    pub fn column_normalize(&self) -> SparseMatrix {
        let degrees: Vec<f64> = (0..self.num_nodes()).map(|v| self.weighted_degree(v)).collect();
        let mut m = self.adjacency();
        for r in 0..m.n_rows {
            for idx in m.offsets[r]..m.offsets[r + 1] {
                m.values[idx] /= degrees[m.indices[idx]];
            }
        }
        m
    }

    /// `D~^-1/2 (A + I) D~^-1/2` over the whole graph.
    pub fn gcn_normalize(&self) -> SparseMatrix {
        let n = self.num_nodes();
        let scale: Vec<f64> = (0..n)
            .map(|v| 1.0 / (self.weighted_degree(v) + 1.0).sqrt())
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(self.neighbors.len() + n);
        let mut values = Vec::with_capacity(self.neighbors.len() + n);
        offsets.push(0);
        for r in 0..n {
            let mut self_done = false;
            for (&c, &w) in self.neighbors(r).iter().zip(self.neighbor_weights(r)) {
                if !self_done && c > r {
                    indices.push(r);
                    values.push(scale[r] * scale[r]);
                    self_done = true;
                }
                indices.push(c);
                values.push(scale[r] * w * scale[c]);
            }
            if !self_done {
                indices.push(r);
                values.push(scale[r] * scale[r]);
            }
            offsets.push(indices.len());
        }
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            offsets,
            indices,
            values,
        }
    }
}

/// `D~^-1/2 (A + I) D~^-1/2` for a dense, possibly weighted adjacency.
pub fn gcn_normalize_dense(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjacency must be square, got {}x{}",
            n,
            adjacency.ncols()
        )));
    }
    if let Some(w) = adjacency.iter().find(|w| w.is_nan() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "adjacency contains negative or NaN weight {w}"
        )));
    }
    let mut normalized = adjacency.clone();
    for i in 0..n {
        normalized[[i, i]] += 1.0;
    }
    let scale: Vec<f64> = normalized
        .rows()
        .into_iter()
        .map(|row| 1.0 / row.sum().sqrt())
        .collect();
    for ((i, j), value) in normalized.indexed_iter_mut() {
        *value *= scale[i] * scale[j];
    }
    Ok(normalized)
}
