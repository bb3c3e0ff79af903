//! Episodic meta-training: a contrastive gradient step on the support set
//! followed by a cross-entropy Adam step on the query set.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrastive::{l_mc, ClassBank, SelfCorrection};
use crate::encoder::{
    adam_step, encoder_backward, gcn_forward, views, AdamConfig, AdamState, EncoderInput, GcnForward, ModelGrads,
    ModelParams, Precision, ViewPair,
};
use crate::episode::{MetaTask, TaskSampler};
use crate::graph::{ClassSplit, Graph};
use crate::mixup::{build_mixed_classes, MixupConfig};
use crate::ppr::{PprConfig, SubgraphSampler};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub n_way: usize,
    pub k_shot: usize,
    pub q_per_task: usize,
    pub lr_mc: f64,
    pub lr_ce: f64,
    pub tau: f64,
    pub zeta: f64,
    pub subgraph_size: usize,
    pub hidden_dim: usize,
    pub mixup: MixupConfig,
    /// Run the contrastive step; `false` trains with the cross-entropy step only.
    pub contrastive: bool,
    pub self_correction: SelfCorrection,
    pub precision: Precision,
    pub seed: u64,
    /// Emit a checkpoint event every this many episodes (0 disables).
    pub checkpoint_every: usize,
    pub cache_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            n_way: 2,
            k_shot: 1,
            q_per_task: 10,
            lr_mc: 0.001,
            lr_ce: 0.001,
            tau: 0.5,
            zeta: 0.15,
            subgraph_size: 10,
            hidden_dim: 1024,
            mixup: MixupConfig::default(),
            contrastive: true,
            self_correction: SelfCorrection::default(),
            precision: Precision::F64,
            seed: 0,
            checkpoint_every: 0,
            cache_capacity: 256,
        }
    }
}

impl TrainConfig {
    pub fn ppr(&self) -> PprConfig {
        PprConfig {
            zeta: self.zeta,
            ..PprConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if !(self.lr_mc >= 0.0 && self.lr_ce > 0.0) {
            return bad(format!("learning rates must be positive (mc={}, ce={})", self.lr_mc, self.lr_ce));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.n_way < 2 || self.k_shot == 0 || self.q_per_task == 0 {
            return bad(format!(
                "need n_way >= 2, k_shot >= 1, query >= 1 (got {}, {}, {})",
                self.n_way, self.k_shot, self.q_per_task
            ));
        }
        if self.hidden_dim == 0 || self.subgraph_size == 0 {
            return bad("hidden_dim and subgraph_size must be positive".into());
        }
        self.ppr().validate()?;
        self.mixup.validate()
    }
}

/// Per-episode training log entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: usize,
    pub loss_mc: f64,
    pub loss_ce: f64,
    pub grad_norm_mc: f64,
    pub grad_norm_ce: f64,
    pub millis: f64,
}

impl EpisodeReport {
    /// L2 norm over the gradients of both steps.
    pub fn grad_norm(&self) -> f64 {
        self.grad_norm_mc.hypot(self.grad_norm_ce)
    }
}

pub fn write_episode_log(path: impl AsRef<Path>, reports: &[EpisodeReport]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "episode,loss_mc,loss_ce,grad_norm,ms").expect("write to vec");
    for r in reports {
        writeln!(out, "{},{},{},{},{:.3}", r.episode, r.loss_mc, r.loss_ce, r.grad_norm(), r.millis)
            .expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Mean cross-entropy of a linear head over pooled query views.
#[derive(Clone, Debug)]
pub struct CeOutput {
    pub loss: f64,
    pub grad_head_weight: Array2<f64>,
    pub grad_head_bias: Array1<f64>,
    /// One gradient per query row.
    pub grad_inputs: Array2<f64>,
}

/// `inputs` holds one pooled view per row.
pub fn ce_loss(head_weight: &Array2<f64>, head_bias: &Array1<f64>, inputs: &Array2<f64>, labels: &[usize]) -> Result<CeOutput> {
    let n_way = head_bias.len();
    if inputs.nrows() != labels.len() || inputs.ncols() != head_weight.nrows() || head_weight.ncols() != n_way {
        return Err(Error::DimensionMismatch(format!(
            "inputs {:?}, {} labels, head {:?}",
            inputs.dim(),
            labels.len(),
            head_weight.dim()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_way) {
        return Err(Error::InvalidParameter(format!("label {y} outside 0..{n_way}")));
    }
    let m = labels.len() as f64;
    let mut probs = inputs.dot(head_weight) + head_bias;
    let mut loss = 0.0;
    for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
        let peak = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - peak).exp());
        let total = row.sum();
        row /= total;
        loss -= row[y].ln();
        row[y] -= 1.0;
    }
    // probs now holds dL/dlogits * m
    let dlogits = probs / m;
    Ok(CeOutput {
        loss: loss / m,
        grad_head_weight: inputs.t().dot(&dlogits),
        grad_head_bias: dlogits.sum_axis(Axis(0)),
        grad_inputs: dlogits.dot(&head_weight.t()),
    })
}

fn encode_all(params: &ModelParams, inputs: &[EncoderInput<'_>]) -> Result<Vec<GcnForward>> {
    inputs.par_iter().map(|input| gcn_forward(*input, params)).collect()
}

/// Sums per-subgraph weight gradients in input order.
fn backward_all(params: &ModelParams, passes: &[GcnForward], grads: &[ViewPair]) -> Result<Array2<f64>> {
    let parts: Vec<Array2<f64>> = passes
        .par_iter()
        .zip(grads)
        .map(|(fwd, g)| encoder_backward(fwd, params, g))
        .collect::<Result<_>>()?;
    let mut total = Array2::zeros(params.weight.raw_dim());
    for part in &parts {
        total += part;
    }
    Ok(total)
}

/// Contrastive loss of one support set and its gradient w.r.t. the encoder weight.
pub fn contrastive_gradient(
    params: &ModelParams,
    n_way: usize,
    k_shot: usize,
    support: &[EncoderInput<'_>],
    mixed: Option<&[EncoderInput<'_>]>,
    tau: f64,
    self_correction: SelfCorrection,
) -> Result<(f64, Array2<f64>)> {
    let support_passes = encode_all(params, support)?;
    let mixed_passes = mixed.map(|m| encode_all(params, m)).transpose()?;
    let bank = ClassBank::new(
        n_way,
        k_shot,
        support_passes.iter().map(views).collect(),
        mixed_passes.as_ref().map(|p| p.iter().map(views).collect()),
        tau,
    )?
    .with_self_correction(self_correction);
    let out = l_mc(&bank);
    let mut grad = backward_all(params, &support_passes, &out.grad_original)?;
    if let (Some(passes), Some(grads)) = (&mixed_passes, &out.grad_mixed) {
        grad += &backward_all(params, passes, grads)?;
    }
    Ok((out.loss, grad))
}

/// Cross-entropy loss of a query set and its gradient w.r.t. all parameters.
pub fn ce_gradient(params: &ModelParams, queries: &[EncoderInput<'_>], labels: &[usize]) -> Result<(f64, ModelGrads)> {
    let passes = encode_all(params, queries)?;
    let mut pooled = Array2::zeros((passes.len(), params.hidden_dim()));
    for (mut row, fwd) in pooled.rows_mut().into_iter().zip(&passes) {
        row.assign(&views(fwd).pooled);
    }
    let out = ce_loss(&params.head_weight, &params.head_bias, &pooled, labels)?;
    let view_grads: Vec<ViewPair> = out
        .grad_inputs
        .rows()
        .into_iter()
        .map(|g| ViewPair {
            central: Array1::zeros(g.len()),
            pooled: g.to_owned(),
        })
        .collect();
    let weight = backward_all(params, &passes, &view_grads)?;
    Ok((
        out.loss,
        ModelGrads {
            weight,
            head_weight: out.grad_head_weight,
            head_bias: out.grad_head_bias,
        },
    ))
}

/// Result of the contrastive adaptation step.
#[derive(Clone, Debug)]
pub struct InnerStep {
    pub adapted: ModelParams,
    pub loss: f64,
    pub grad_norm: f64,
}

/// `theta~ = theta - lr * grad`, one plain gradient step on the encoder
/// weight. `theta` itself is not modified.
pub fn inner_update<F>(params: &ModelParams, lr_mc: f64, gradient: F) -> Result<InnerStep>
where
    F: FnOnce(&ModelParams) -> Result<(f64, Array2<f64>)>,
{
    let (loss, grad) = gradient(params)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "contrastive step".into(),
        });
    }
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(InnerStep {
        adapted: params.sgd_encoder(&grad, lr_mc),
        loss,
        grad_norm,
    })
}

/// Applies one Adam step with `grads` (taken at `adapted`) to `adapted`.
pub fn outer_update(mut adapted: ModelParams, grads: &ModelGrads, state: &mut AdamState, cfg: &AdamConfig) -> Result<ModelParams> {
    adam_step(&mut adapted, grads, state, cfg)?;
    Ok(adapted)
}

/// Everything an episode needs besides the parameters.
pub struct EpisodeContext<'a, 'g> {
    pub sampler: &'a SubgraphSampler<'g>,
    pub cfg: &'a TrainConfig,
}

/// Runs one episode on `task`, returning the updated parameters.
pub fn run_episode(
    ctx: &EpisodeContext<'_, '_>,
    episode: usize,
    task: &MetaTask,
    params: &ModelParams,
    adam: &mut AdamState,
) -> Result<(ModelParams, EpisodeReport)> {
    let started = Instant::now();
    let cfg = ctx.cfg;
    let support_ctx = task
        .support
        .par_iter()
        .map(|&(v, _)| ctx.sampler.context(v))
        .collect::<Result<Vec<_>>>()?;
    let query_ctx = task
        .query
        .par_iter()
        .map(|&(v, _)| ctx.sampler.context(v))
        .collect::<Result<Vec<_>>>()?;

    let mut params = params.clone();
    if params.n_way() != task.n_way {
        params.reset_head(task.n_way);
        adam.reset_head(&params);
    }

    let (adapted, loss_mc, grad_norm_mc) = if cfg.contrastive {
        let mixed = if cfg.mixup.enabled {
            let mut rng = substream(cfg.seed, "mixup", &[episode as u64]);
            Some(build_mixed_classes(task, ctx.sampler, &cfg.mixup, &mut rng)?)
        } else {
            None
        };
        let support: Vec<EncoderInput<'_>> = support_ctx.iter().map(|c| (&c.subgraph).into()).collect();
        let mixed_inputs: Option<Vec<EncoderInput<'_>>> = mixed.as_ref().map(|m| m.iter().map(Into::into).collect());
        let step = inner_update(&params, cfg.lr_mc, |p| {
            contrastive_gradient(
                p,
                task.n_way,
                task.k_shot,
                &support,
                mixed_inputs.as_deref(),
                cfg.tau,
                cfg.self_correction,
            )
        })?;
        let mut adapted = step.adapted;
        adapted.quantize(cfg.precision);
        (adapted, step.loss, step.grad_norm)
    } else {
        (params.clone(), 0.0, 0.0)
    };

    let queries: Vec<EncoderInput<'_>> = query_ctx.iter().map(|c| (&c.subgraph).into()).collect();
    let (loss_ce, grads) = ce_gradient(&adapted, &queries, &task.query_labels())?;
    if !loss_ce.is_finite() {
        return Err(Error::NonFinite {
            context: "cross-entropy loss".into(),
        });
    }
    let grad_norm_ce = grads.norm();
    let mut next = outer_update(adapted, &grads, adam, &AdamConfig::with_lr(cfg.lr_ce))?;
    next.quantize(cfg.precision);
    if !next.is_finite() {
        return Err(Error::NonFinite {
            context: "updated parameters".into(),
        });
    }
    Ok((
        next,
        EpisodeReport {
            episode,
            loss_mc,
            loss_ce,
            grad_norm_mc,
            grad_norm_ce,
            millis: started.elapsed().as_secs_f64() * 1e3,
        },
    ))
}

/// Training events delivered to the observer of [`train_with`].
pub enum TrainEvent<'a> {
    Episode(&'a EpisodeReport),
    Checkpoint { episode: usize, params: &'a ModelParams },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub reports: Vec<EpisodeReport>,
}

pub fn train(g: &Graph, split: &ClassSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(g, split, cfg, |_| Ok(()))
}

/// Meta-trains from a fresh initialization, calling `observer` after every
/// episode and at each checkpoint.
pub fn train_with<F>(g: &Graph, split: &ClassSplit, cfg: &TrainConfig, mut observer: F) -> Result<TrainOutcome>
where
    F: FnMut(TrainEvent<'_>) -> Result<()>,
{
    cfg.validate()?;
    split.validate(g.num_classes())?;
    let sampler = SubgraphSampler::new(g, cfg.ppr(), cfg.subgraph_size, cfg.cache_capacity)?;
    let tasks = TaskSampler::new(g, &split.train);
    let mut params = ModelParams::init(g.feature_dim(), cfg.hidden_dim, cfg.n_way, &mut substream(cfg.seed, "init", &[]));
    params.quantize(cfg.precision);
    let mut adam = AdamState::new(&params);
    let ctx = EpisodeContext { sampler: &sampler, cfg };
    let mut reports = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let task = tasks.sample(
            cfg.n_way,
            cfg.k_shot,
            cfg.q_per_task,
            &mut substream(cfg.seed, "sampler", &[episode as u64]),
        )?;
        let (next, report) = run_episode(&ctx, episode, &task, &params, &mut adam).map_err(|e| match e {
            Error::NonFinite { context } => Error::EpisodeAborted {
                episode,
                reason: format!("non-finite value in {context}"),
                diagnostic: format!(
                    "classes={:?} support={:?} query={:?} |W|={:.4e}",
                    task.class_ids,
                    task.support,
                    task.query,
                    params.weight.iter().map(|w| w * w).sum::<f64>().sqrt()
                ),
            },
            other => other,
        })?;
        params = next;
        log::debug!(
            "episode {episode}: L_MC={:.5} L_CE={:.5} ({:.1} ms)",
            report.loss_mc,
            report.loss_ce,
            report.millis
        );
        observer(TrainEvent::Episode(&report))?;
        reports.push(report);
        if cfg.checkpoint_every > 0 && (episode + 1) % cfg.checkpoint_every == 0 {
            observer(TrainEvent::Checkpoint {
                episode: episode + 1,
                params: &params,
            })?;
        }
    }
    Ok(TrainOutcome { params, reports })
}
