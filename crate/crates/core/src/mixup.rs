//! Similarity-sensitive subgraph mix-up.
//!
//! Each support node is paired with a uniformly drawn partner node. The two
//! subgraphs are interpolated element-wise with ratios drawn from
//! `Beta(alpha, beta)`, where `alpha` grows with the Bhattacharyya distance
//! between the nodes' PageRank score vectors, so dissimilar partners
//! contribute more of their structure.

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderInput;
use crate::episode::MetaTask;
use crate::ppr::{SubgraphSampler, Subgraph};
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Lower clamp applied to the Bhattacharyya coefficient before the log.
pub const MIN_COEFFICIENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    pub enabled: bool,
    /// Second Beta shape parameter.
    pub beta: f64,
    /// Upper bound `C` of the first Beta shape parameter.
    pub magnitude: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            enabled: true,
            beta: 5.0,
            magnitude: 10.0,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) || !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mix-up needs beta > 0 and C > 0, got beta={}, C={}",
                self.beta, self.magnitude
            )));
        }
        Ok(())
    }
}

/// Interpolation of two equally shaped subgraphs.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedSubgraph {
    pub adjacency: Array2<f64>,
    pub features: Array2<f64>,
    /// A slot is real if it is real in either source.
    pub real_slots: usize,
    pub anchor: usize,
    pub partner: usize,
    pub alpha: Option<f64>,
}

impl<'a> From<&'a MixedSubgraph> for EncoderInput<'a> {
    fn from(m: &'a MixedSubgraph) -> Self {
        EncoderInput {
            adjacency: m.adjacency.view(),
            features: m.features.view(),
            real_slots: m.real_slots,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `C * sigmoid(-ln(coefficient))` with the coefficient clamped to `[1e-12, 1]`.
pub fn alpha_from_coefficient(coefficient: f64, magnitude: f64) -> f64 {
    let clamped = coefficient.clamp(MIN_COEFFICIENT, 1.0);
    sigmoid(-clamped.ln()) * magnitude
}

/// Bhattacharyya coefficient of two non-negative vectors after L1 normalization.
/// `None` when either vector has zero mass.
pub fn bhattacharyya_coefficient(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "score vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|&x| x.is_nan() || x < 0.0) {
        return Err(Error::InvalidParameter("score vectors must be non-negative".into()));
    }
    let (sum_a, sum_b): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if sum_a == 0.0 || sum_b == 0.0 {
        return Ok(None);
    }
    let overlap: f64 = a.iter().zip(b).map(|(&x, &y)| ((x / sum_a) * (y / sum_b)).sqrt()).sum();
    let mass_a: f64 = a.iter().map(|&x| x / sum_a).sum();
    let mass_b: f64 = b.iter().map(|&y| y / sum_b).sum();
    Ok(Some(overlap / (mass_a * mass_b).sqrt()))
}

/// Beta shape `alpha` for mixing the subgraphs of two nodes with score vectors `a` and `b`.
pub fn bhattacharyya_alpha(a: &[f64], b: &[f64], magnitude: f64) -> Result<f64> {
    match bhattacharyya_coefficient(a, b)? {
        Some(coefficient) => Ok(alpha_from_coefficient(coefficient, magnitude)),
        None => {
            log::warn!("zero-mass score vector in mix-up; using alpha = C");
            Ok(magnitude)
        }
    }
}

/// Draws `(Lambda_A, Lambda_X)` with i.i.d. `Beta(alpha, beta)` entries,
/// adjacency ratios first, row-major.
pub fn sample_ratio_matrices<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    shape_a: (usize, usize),
    shape_x: (usize, usize),
    rng: &mut R,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let dist = Beta::new(alpha, beta)
        .map_err(|e| Error::InvalidParameter(format!("Beta({alpha}, {beta}): {e}")))?;
    let lambda_a = Array2::from_shape_simple_fn(shape_a, || dist.sample(rng));
    let lambda_x = Array2::from_shape_simple_fn(shape_x, || dist.sample(rng));
    Ok((lambda_a, lambda_x))
}

/// `A~ = L_A o A_a + (1 - L_A) o A_b`, symmetrized as `(A~ + A~^T) / 2`;
/// features mix the same way without symmetrization.
pub fn mix_subgraphs(
    a: &Subgraph,
    b: &Subgraph,
    lambda_a: &Array2<f64>,
    lambda_x: &Array2<f64>,
) -> Result<MixedSubgraph> {
    if a.adjacency.dim() != b.adjacency.dim()
        || a.features.dim() != b.features.dim()
        || lambda_a.dim() != a.adjacency.dim()
        || lambda_x.dim() != a.features.dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "cannot mix subgraphs {:?}/{:?} and {:?}/{:?} with ratios {:?}/{:?}",
            a.adjacency.dim(),
            a.features.dim(),
            b.adjacency.dim(),
            b.features.dim(),
            lambda_a.dim(),
            lambda_x.dim()
        )));
    }
    let mix = |x: &Array2<f64>, y: &Array2<f64>, lambda: &Array2<f64>| {
        let mut out = Array2::zeros(x.raw_dim());
        Zip::from(&mut out)
            .and(x)
            .and(y)
            .and(lambda)
            .for_each(|o, &x, &y, &l| *o = l * x + (1.0 - l) * y);
        out
    };
    let raw = mix(&a.adjacency, &b.adjacency, lambda_a);
    let adjacency = (&raw + &raw.t()) * 0.5;
    let features = mix(&a.features, &b.features, lambda_x);
    Ok(MixedSubgraph {
        adjacency,
        features,
        real_slots: a.real_count().max(b.real_count()),
        anchor: a.central(),
        partner: b.central(),
        alpha: None,
    })
}

/// Mixes the subgraph of `anchor` with that of `partner`.
pub fn mix_pair<R: Rng + ?Sized>(
    sampler: &SubgraphSampler<'_>,
    anchor: usize,
    partner: usize,
    cfg: &MixupConfig,
    rng: &mut R,
) -> Result<MixedSubgraph> {
    let a = sampler.context(anchor)?;
    let b = sampler.context(partner)?;
    let alpha = bhattacharyya_alpha(&a.scores.values, &b.scores.values, cfg.magnitude)?;
    let (lambda_a, lambda_x) = sample_ratio_matrices(
        alpha,
        cfg.beta,
        a.subgraph.adjacency.dim(),
        a.subgraph.features.dim(),
        rng,
    )?;
    let mut mixed = mix_subgraphs(&a.subgraph, &b.subgraph, &lambda_a, &lambda_x)?;
    mixed.alpha = Some(alpha);
    Ok(mixed)
}

/// One mixed subgraph per support node, in support order, so that entry
/// `i * k_shot + j` belongs to mixed class `i`.
///
/// Each support node gets its own generator seeded from `rng` in order, so
/// the result does not depend on how the work is scheduled.
pub fn build_mixed_classes<R: Rng + ?Sized>(
    task: &MetaTask,
    sampler: &SubgraphSampler<'_>,
    cfg: &MixupConfig,
    rng: &mut R,
) -> Result<Vec<MixedSubgraph>> {
    cfg.validate()?;
    let n = sampler.graph().num_nodes();
    let seeds: Vec<u64> = task.support.iter().map(|_| rng.random()).collect();
    task.support
        .par_iter()
        .zip(seeds)
        .map(|(&(anchor, _), seed)| {
            let mut node_rng = StreamRng::seed_from_u64(seed);
            let partner = node_rng.random_range(0..n);
            mix_pair(sampler, anchor, partner, cfg, &mut node_rng)
        })
        .collect()
}
