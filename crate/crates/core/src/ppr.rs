//! Personalized-PageRank importance scores and fixed-size subgraph extraction.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PprConfig {
    /// Restart probability.
    pub zeta: f64,
    /// Stop once the L1 mass still missing from the truncated series is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        PprConfig {
            zeta: 0.15,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::InvalidParameter(format!("zeta must lie in (0, 1], got {}", self.zeta)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Column `node` of `zeta * (I - (1 - zeta) * A D^-1)^-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceScores {
    pub node: usize,
    pub zeta: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl ImportanceScores {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Scores for query node `v` by the truncated series
/// `zeta * sum_k (1 - zeta)^k Abar^k e_v`.
pub fn compute_ppr(g: &Graph, v: usize, cfg: &PprConfig) -> Result<ImportanceScores> {
    cfg.validate()?;
    let n = g.num_nodes();
    if v >= n {
        return Err(Error::InvalidParameter(format!("node {v} outside graph of {n} nodes")));
    }
    let degrees: Vec<f64> = (0..n).map(|u| g.weighted_degree(u)).collect();
    let decay = 1.0 - cfg.zeta;
    // L1 norm of the tail after a term of mass m is at most m * decay / zeta.
    let tail = |mass: f64| mass * decay / cfg.zeta;

    let mut scores = vec![0.0; n];
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut active = vec![v];
    let mut next_active = Vec::new();
    let mut touched = vec![false; n];
    term[v] = cfg.zeta;
    scores[v] = cfg.zeta;
    let mut residual = tail(cfg.zeta);
    let mut iterations = 0;

    while residual >= cfg.tol {
        if iterations == cfg.max_iter {
            return Err(Error::PprNotConverged {
                node: v,
                iterations,
                residual,
            });
        }
        iterations += 1;
        for &j in &active {
            let mass = term[j];
            term[j] = 0.0;
            if mass == 0.0 || degrees[j] == 0.0 {
                continue;
            }
            let share = decay * mass / degrees[j];
            for (&i, &w) in g.neighbors(j).iter().zip(g.neighbor_weights(j)) {
                if !touched[i] {
                    touched[i] = true;
                    next_active.push(i);
                }
                next[i] += share * w;
            }
        }
        next_active.sort_unstable();
        let mut mass = 0.0;
        for &i in &next_active {
            touched[i] = false;
            scores[i] += next[i];
            mass += next[i];
        }
        std::mem::swap(&mut term, &mut next);
        std::mem::swap(&mut active, &mut next_active);
        next_active.clear();
        residual = tail(mass);
    }

    Ok(ImportanceScores {
        node: v,
        zeta: cfg.zeta,
        values: scores,
        iterations,
        residual,
    })
}

/// Top-scoring neighborhood of a node, excluding the node itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    /// Selected nodes by descending score, ties by ascending id.
    pub nodes: Vec<usize>,
    /// Slots left empty because fewer than `k_s` nodes had positive score.
    pub deficit: usize,
}

pub fn extract_neighborhood(scores: &ImportanceScores, k_s: usize) -> Neighborhood {
    let mut candidates: Vec<(usize, f64)> = scores
        .values
        .iter()
        .enumerate()
        .filter(|&(u, &s)| u != scores.node && s > 0.0)
        .map(|(u, &s)| (u, s))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(k_s);
    let nodes: Vec<usize> = candidates.into_iter().map(|(u, _)| u).collect();
    Neighborhood {
        deficit: k_s - nodes.len(),
        nodes,
    }
}

/// A node's subgraph with `k_s + 1` slots; slot 0 holds the central node.
///
/// Slots past `nodes.len()` are padding with zero features and no edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub nodes: Vec<usize>,
    pub adjacency: Array2<f64>,
    pub features: Array2<f64>,
}

impl Subgraph {
    pub fn central(&self) -> usize {
        self.nodes[0]
    }

    pub fn slots(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn real_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.slots()).map(|s| s < self.nodes.len()).collect()
    }

    /// Edge list of the induced subgraph, one `slot_a slot_b weight` line per edge.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# central={} slots={}", self.central(), self.slots());
        for a in 0..self.slots() {
            for b in a + 1..self.slots() {
                let w = self.adjacency[[a, b]];
                if w != 0.0 {
                    let _ = writeln!(out, "{a} {b} {w}");
                }
            }
        }
        out
    }
}

/// Builds the `(k_s + 1)`-slot subgraph `[v] + gamma + padding`, keeping every
/// original edge whose endpoints are both selected.
pub fn induce_subgraph(g: &Graph, v: usize, gamma: &[usize], k_s: usize) -> Result<Subgraph> {
    if gamma.len() > k_s {
        return Err(Error::InvalidParameter(format!(
            "neighborhood of {} nodes exceeds k_s = {k_s}",
            gamma.len()
        )));
    }
    if gamma.contains(&v) {
        return Err(Error::InvalidParameter(format!("neighborhood of {v} contains {v}")));
    }
    let slots = k_s + 1;
    let mut nodes = Vec::with_capacity(gamma.len() + 1);
    nodes.push(v);
    nodes.extend_from_slice(gamma);
    let slot_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(s, &u)| (u, s)).collect();

    let mut adjacency = Array2::zeros((slots, slots));
    for (a, &u) in nodes.iter().enumerate() {
        for (&w, &weight) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
            if let Some(&b) = slot_of.get(&w) {
                adjacency[[a, b]] = weight;
            }
        }
    }
    let mut features = Array2::zeros((slots, g.feature_dim()));
    for (s, &u) in nodes.iter().enumerate() {
        features.row_mut(s).assign(&g.feature_row(u));
    }
    Ok(Subgraph {
        nodes,
        adjacency,
        features,
    })
}

/// PPR scores and the extracted subgraph for one node.
#[derive(Debug)]
pub struct NodeContext {
    pub scores: ImportanceScores,
    pub subgraph: Subgraph,
}

/// Computes and memoizes per-node [`NodeContext`]s over a shared graph.
///
/// The cache holds at most `capacity` entries and evicts in insertion order.
/// Results are pure functions of the node, so eviction never changes outputs.
pub struct SubgraphSampler<'g> {
    graph: &'g Graph,
    ppr: PprConfig,
    k_s: usize,
    capacity: usize,
    cache: Mutex<Cache>,
}

#[derive(Default)]
struct Cache {
    entries: HashMap<usize, Arc<NodeContext>>,
    order: VecDeque<usize>,
}

impl<'g> SubgraphSampler<'g> {
    pub fn new(graph: &'g Graph, ppr: PprConfig, k_s: usize, capacity: usize) -> Result<Self> {
        ppr.validate()?;
        if k_s == 0 {
            return Err(Error::InvalidParameter("subgraph size k_s must be positive".into()));
        }
        Ok(SubgraphSampler {
            graph,
            ppr,
            k_s,
            capacity,
            cache: Mutex::new(Cache::default()),
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn ppr_config(&self) -> &PprConfig {
        &self.ppr
    }

    pub fn context(&self, v: usize) -> Result<Arc<NodeContext>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").entries.get(&v) {
            return Ok(Arc::clone(hit));
        }
        let scores = compute_ppr(self.graph, v, &self.ppr)?;
        let hood = extract_neighborhood(&scores, self.k_s);
        let subgraph = induce_subgraph(self.graph, v, &hood.nodes, self.k_s)?;
        let ctx = Arc::new(NodeContext { scores, subgraph });
        if self.capacity > 0 {
            let mut cache = self.cache.lock().expect("cache lock");
            if !cache.entries.contains_key(&v) {
                while cache.entries.len() >= self.capacity {
                    match cache.order.pop_front() {
                        Some(old) => {
                            cache.entries.remove(&old);
                        }
                        None => break,
                    }
                }
                cache.entries.insert(v, Arc::clone(&ctx));
                cache.order.push_back(v);
            }
        }
        Ok(ctx)
    }
}
