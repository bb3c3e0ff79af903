use ndarray::{ArrayViewMut, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::{ModelGrads, ModelParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelGrads,
    pub v: ModelGrads,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: ModelGrads::zeros_like(params),
            v: ModelGrads::zeros_like(params),
            t: 0,
        }
    }

    /// Zeroes the head moments, e.g. after the head was re-initialized.
    pub fn reset_head(&mut self, params: &ModelParams) {
        let zeros = ModelGrads::zeros_like(params);
        self.m.head_weight = zeros.head_weight.clone();
        self.m.head_bias = zeros.head_bias.clone();
        self.v.head_weight = zeros.head_weight;
        self.v.head_bias = zeros.head_bias;
    }
}

fn update<D: Dimension>(
    mut param: ArrayViewMut<'_, f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &AdamConfig,
    correction1: f64,
    correction2: f64,
) {
    Zip::from(&mut param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        });
}

/// One bias-corrected Adam step over every parameter tensor.
pub fn adam_step(params: &mut ModelParams, grads: &ModelGrads, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "Adam gradient".into(),
        });
    }
    if grads.weight.dim() != params.weight.dim()
        || grads.head_weight.dim() != params.head_weight.dim()
        || grads.head_bias.dim() != params.head_bias.dim()
    {
        return Err(Error::DimensionMismatch("gradient shapes differ from parameters".into()));
    }
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    update(params.weight.view_mut(), &grads.weight, &mut state.m.weight, &mut state.v.weight, cfg, c1, c2);
    update(
        params.head_weight.view_mut(),
        &grads.head_weight,
        &mut state.m.head_weight,
        &mut state.v.head_weight,
        cfg,
        c1,
        c2,
    );
    update(
        params.head_bias.view_mut(),
        &grads.head_bias,
        &mut state.m.head_bias,
        &mut state.v.head_bias,
        cfg,
        c1,
        c2,
    );
    params.bump_generation();
    Ok(())
}
