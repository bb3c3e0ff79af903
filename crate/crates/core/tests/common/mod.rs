#![allow(dead_code)]

pub mod criteria;

use cosmic_core::encoder::ViewPair;
use cosmic_core::graph::Graph;
use cosmic_core::rng::substream;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

/// Erdos-Renyi graph with random features and labels.
pub fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    let mut rng = substream(seed, "test-graph", &[]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let features = Array2::from_shape_simple_fn((n, 3), || rng.random::<f64>());
    let labels = (0..n).map(|v| v % 2).collect();
    Graph::from_edges(&edges, features, labels).unwrap()
}

/// Dense `zeta (I - (1 - zeta) A D^-1)^-1`; column `v` holds the scores of `v`.
pub fn dense_ppr(g: &Graph, zeta: f64) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut m = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        let d = g.weighted_degree(j);
        if d == 0.0 {
            continue;
        }
        for (&i, &w) in g.neighbors(j).iter().zip(g.neighbor_weights(j)) {
            m[(i, j)] -= (1.0 - zeta) * w / d;
        }
    }
    m.try_inverse().expect("I - (1 - zeta) Abar is invertible") * zeta
}

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Array1<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_views<R: Rng>(rng: &mut R, count: usize, dim: usize, scale: f64) -> Vec<ViewPair> {
    (0..count)
        .map(|_| ViewPair {
            central: gaussian_vec(rng, dim, scale),
            pooled: gaussian_vec(rng, dim, scale),
        })
        .collect()
}

fn view(v: &ViewPair, t: usize) -> &Array1<f64> {
    if t == 0 {
        &v.central
    } else {
        &v.pooled
    }
}

/// `MI(anchor, class)` written out term by term. `own` is the anchor's shot
/// index when `class` is the anchor's own class; its same-view self pairs are
/// then left out of the sum.
fn mi_literal(anchor: &ViewPair, class: &[ViewPair], own: Option<usize>, tau: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..2 {
        for (l, member) in class.iter().enumerate() {
            for r in 0..2 {
                if own == Some(l) && t == r {
                    continue;
                }
                total += (view(anchor, t).dot(view(member, r)) / tau).exp();
            }
        }
    }
    total
}

/// `MI(anchor, class)` as "sum everything, then subtract the self pairs".
/// Loses precision when self similarities dominate.
pub fn mi_subtractive(anchor: &ViewPair, class: &[ViewPair], is_own: bool, tau: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..2 {
        for member in class {
            for r in 0..2 {
                total += (view(anchor, t).dot(view(member, r)) / tau).exp();
            }
        }
    }
    if is_own {
        for t in 0..2 {
            total -= (view(anchor, t).dot(view(anchor, t)) / tau).exp();
        }
    }
    total
}

/// Contrastive episode loss by direct nested loops over anchors and classes.
pub fn l_mc_literal(n: usize, k: usize, original: &[ViewPair], mixed: Option<&[ViewPair]>, tau: f64) -> f64 {
    let class = |pool: &[ViewPair], i: usize| pool[i * k..(i + 1) * k].to_vec();
    let mut loss = 0.0;
    let mut original_sum = 0.0;
    for i in 0..n {
        for j in 0..k {
            let a = &original[i * k + j];
            let num = mi_literal(a, &class(original, i), Some(j), tau);
            let mut den = 0.0;
            for kk in 0..n {
                if kk != i {
                    den += mi_literal(a, &class(original, kk), None, tau);
                }
            }
            if let Some(m) = mixed {
                for kk in 0..n {
                    den += mi_literal(a, &class(m, kk), None, tau);
                }
            }
            original_sum += -(num / den).ln();
        }
    }
    loss += original_sum / (n * k) as f64;
    if let Some(m) = mixed {
        let mut mixed_sum = 0.0;
        for i in 0..n {
            for j in 0..k {
                let a = &m[i * k + j];
                let num = mi_literal(a, &class(m, i), Some(j), tau);
                let mut den = 0.0;
                for kk in 0..n {
                    den += mi_literal(a, &class(original, kk), None, tau);
                }
                for kk in 0..n {
                    if kk != i {
                        den += mi_literal(a, &class(m, kk), None, tau);
                    }
                }
                mixed_sum += -(num / den).ln();
            }
        }
        loss += mixed_sum / (n * k) as f64;
    }
    loss
}

/// Random `slots`-slot subgraph input: the first `real` slots carry a random
/// connected-ish adjacency and Gaussian features, the rest are zero padding.
pub fn random_subgraph<R: Rng>(rng: &mut R, slots: usize, real: usize, dim: usize) -> (Array2<f64>, Array2<f64>) {
    let mut adj = Array2::zeros((slots, slots));
    for a in 1..real {
        let b = rng.random_range(0..a);
        adj[[a, b]] = 1.0;
        adj[[b, a]] = 1.0;
        for c in 0..a {
            if c != b && rng.random_bool(0.3) {
                adj[[a, c]] = 1.0;
                adj[[c, a]] = 1.0;
            }
        }
    }
    let mut x = Array2::zeros((slots, dim));
    for s in 0..real {
        for f in 0..dim {
            x[[s, f]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    (adj, x)
}

/// Minimizes the L2-regularized multinomial logistic objective by fixed-step
/// gradient descent with step `1 / L`, using plain loops.
pub fn logreg_oracle(x: &[Vec<f64>], labels: &[usize], n_classes: usize, weight_decay: f64, tol: f64) -> f64 {
    let m = x.len();
    let d = x[0].len();
    let max_sq = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
    let step = 1.0 / (0.5 * max_sq + weight_decay);
    let mut w = vec![vec![0.0; n_classes]; d + 1];
    let eval = |w: &Vec<Vec<f64>>| -> (f64, Vec<Vec<f64>>) {
        let mut f = 0.0;
        let mut g = vec![vec![0.0; n_classes]; d + 1];
        for (row, &y) in x.iter().zip(labels) {
            let z: Vec<f64> = (0..n_classes)
                .map(|c| w[d][c] + (0..d).map(|f| row[f] * w[f][c]).sum::<f64>())
                .collect();
            let peak = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - peak).exp()).sum();
            f += peak + sum.ln() - z[y];
            for c in 0..n_classes {
                let p = (z[c] - peak).exp() / sum - if c == y { 1.0 } else { 0.0 };
                for f_idx in 0..d {
                    g[f_idx][c] += p * row[f_idx] / m as f64;
                }
                g[d][c] += p / m as f64;
            }
        }
        f /= m as f64;
        for (wr, gr) in w.iter().zip(g.iter_mut()) {
            for (wv, gv) in wr.iter().zip(gr.iter_mut()) {
                f += 0.5 * weight_decay * wv * wv;
                *gv += weight_decay * wv;
            }
        }
        (f, g)
    };
    for _ in 0..1_000_000 {
        let (f, g) = eval(&w);
        let norm: f64 = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if norm < tol {
            return f;
        }
        for (wr, gr) in w.iter_mut().zip(&g) {
            for (wv, gv) in wr.iter_mut().zip(gr) {
                *wv -= step * gv;
            }
        }
    }
    panic!("oracle did not converge");
}
