//! Planted-partition (stochastic block) graph generator.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub num_classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feat_noise: f64,
    pub seed: u64,
}

impl PlantedPartition {
    pub fn generate(&self) -> Result<Graph> {
        generate_planted_partition(
            self.num_classes,
            self.nodes_per_class,
            self.p_in,
            self.p_out,
            self.feat_dim,
            self.feat_noise,
            self.seed,
        )
    }
}

/// Samples a graph whose node `v` belongs to class `v / nodes_per_class`.
///
/// Each unordered pair is joined with probability `p_in` inside a class and
/// `p_out` across classes. Features are the one-hot class mean `e_c` plus
/// isotropic Gaussian noise with standard deviation `feat_noise`.
pub fn generate_planted_partition(
    num_classes: usize,
    nodes_per_class: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    feat_noise: f64,
    seed: u64,
) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out >= p_in {
        return Err(Error::InvalidParameter(format!(
            "planted partition requires 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if feat_dim < num_classes {
        return Err(Error::InvalidParameter(format!(
            "feat_dim ({feat_dim}) must be at least num_classes ({num_classes})"
        )));
    }
    if !(feat_noise >= 0.0 && feat_noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("feat_noise must be >= 0, got {feat_noise}")));
    }
    let n = num_classes * nodes_per_class;
    let labels: Vec<usize> = (0..n).map(|v| v / nodes_per_class.max(1)).collect();

    let mut edge_rng = substream(seed, "planted-edges", &[]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if edge_rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let mut feat_rng = substream(seed, "planted-features", &[]);
    let mut features = Array2::zeros((n, feat_dim));
    for v in 0..n {
        for c in 0..feat_dim {
            let noise: f64 = StandardNormal.sample(&mut feat_rng);
            let mean = if c == labels[v] { 1.0 } else { 0.0 };
            features[[v, c]] = mean + feat_noise * noise;
        }
    }
    Graph::from_edges(&edges, features, labels)
}
