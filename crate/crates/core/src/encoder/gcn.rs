use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use super::ModelParams;
use crate::graph::gcn_normalize_dense;
use crate::ppr::Subgraph;
use crate::{Error, Result};

/// Borrowed adjacency and features of a fixed-size subgraph.
///
/// Slots `0..real_slots` hold real (or mixed) nodes; the rest are padding and
/// are left out of mean pooling.
#[derive(Clone, Copy, Debug)]
pub struct EncoderInput<'a> {
    pub adjacency: ArrayView2<'a, f64>,
    pub features: ArrayView2<'a, f64>,
    pub real_slots: usize,
}

impl<'a> From<&'a Subgraph> for EncoderInput<'a> {
    fn from(sub: &'a Subgraph) -> Self {
        EncoderInput {
            adjacency: sub.adjacency.view(),
            features: sub.features.view(),
            real_slots: sub.real_count(),
        }
    }
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GcnForward {
    generation: u64,
    /// `A_hat X`
    propagated: Array2<f64>,
    /// `A_hat X W`
    pre_activation: Array2<f64>,
    pub hidden: Array2<f64>,
    real_slots: usize,
}

impl GcnForward {
    pub fn pre_activation(&self) -> &Array2<f64> {
        &self.pre_activation
    }

    pub fn real_slots(&self) -> usize {
        self.real_slots
    }
}

/// The two views of a node: its own embedding and the subgraph mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPair {
    pub central: Array1<f64>,
    pub pooled: Array1<f64>,
}

impl ViewPair {
    pub fn zeros(dim: usize) -> Self {
        ViewPair {
            central: Array1::zeros(dim),
            pooled: Array1::zeros(dim),
        }
    }

    pub fn view(&self, t: usize) -> &Array1<f64> {
        match t {
            0 => &self.central,
            1 => &self.pooled,
            _ => panic!("view index {t} out of range"),
        }
    }
}

/// `H = ReLU(A_hat X W)` with `A_hat` the self-looped symmetric normalization.
pub fn gcn_forward(input: EncoderInput<'_>, params: &ModelParams) -> Result<GcnForward> {
    let slots = input.adjacency.nrows();
    if input.features.nrows() != slots {
        return Err(Error::DimensionMismatch(format!(
            "{} adjacency slots but {} feature rows",
            slots,
            input.features.nrows()
        )));
    }
    if input.features.ncols() != params.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature width {} does not match encoder input {}",
            input.features.ncols(),
            params.feature_dim()
        )));
    }
    if input.real_slots == 0 || input.real_slots > slots {
        return Err(Error::DimensionMismatch(format!(
            "{} real slots in a {}-slot subgraph",
            input.real_slots, slots
        )));
    }
    let a_hat = gcn_normalize_dense(&input.adjacency.to_owned())?;
    let propagated = a_hat.dot(&input.features);
    let pre_activation = propagated.dot(&params.weight);
    let hidden = pre_activation.mapv(|z| z.max(0.0));
    Ok(GcnForward {
        generation: params.generation(),
        propagated,
        pre_activation,
        hidden,
        real_slots: input.real_slots,
    })
}

pub fn views(fwd: &GcnForward) -> ViewPair {
    let real = fwd.hidden.slice(s![..fwd.real_slots, ..]);
    ViewPair {
        central: fwd.hidden.row(0).to_owned(),
        pooled: real.mean_axis(Axis(0)).expect("at least one real slot"),
    }
}

/// Gradient w.r.t. the encoder weight given the gradient w.r.t. `H`.
pub fn encoder_backward_hidden(fwd: &GcnForward, params: &ModelParams, grad_hidden: &Array2<f64>) -> Result<Array2<f64>> {
    if fwd.generation != params.generation() {
        return Err(Error::StaleCache {
            cached: fwd.generation,
            current: params.generation(),
        });
    }
    if grad_hidden.dim() != fwd.hidden.dim() {
        return Err(Error::DimensionMismatch(format!(
            "upstream gradient {:?} vs activations {:?}",
            grad_hidden.dim(),
            fwd.hidden.dim()
        )));
    }
    let mut local = grad_hidden.clone();
    Zip::from(&mut local).and(&fwd.pre_activation).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    Ok(fwd.propagated.t().dot(&local))
}

/// Gradient w.r.t. the encoder weight given gradients w.r.t. both views.
pub fn encoder_backward(fwd: &GcnForward, params: &ModelParams, grad_views: &ViewPair) -> Result<Array2<f64>> {
    let mut grad_hidden = Array2::zeros(fwd.hidden.raw_dim());
    let share = 1.0 / fwd.real_slots as f64;
    for mut row in grad_hidden.rows_mut().into_iter().take(fwd.real_slots) {
        row.scaled_add(share, &grad_views.pooled);
    }
    grad_hidden.row_mut(0).scaled_add(1.0, &grad_views.central);
    encoder_backward_hidden(fwd, params, &grad_hidden)
}
