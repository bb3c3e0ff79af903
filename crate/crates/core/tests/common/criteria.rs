#![allow(dead_code)]

use std::time::Instant;

use cosmic_core::contrastive::{l_mc, ClassBank, SelfCorrection};
use cosmic_core::encoder::{finite_diff_check, gcn_forward, save_checkpoint, CheckpointHeader, EncoderInput, ModelParams, Precision};
use cosmic_core::eval::{ari, clustering_quality, evaluate, logreg_objective, nmi, write_results_csv, EvalConfig, EvalSummary};
use cosmic_core::graph::{generate_planted_partition, ClassSplit, Graph};
use cosmic_core::mixup::{alpha_from_coefficient, bhattacharyya_alpha, mix_subgraphs, sample_ratio_matrices};
use cosmic_core::ppr::{compute_ppr, PprConfig, Subgraph, SubgraphSampler};
use cosmic_core::rng::substream;
use cosmic_core::trainer::{ce_gradient, contrastive_gradient, train, TrainConfig};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dense_ppr, l_mc_literal, random_graph, random_subgraph, random_views};

/// Outcome of one acceptance criterion: pass flag plus a one-line detail.
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

pub const GRAD_H: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_FLOOR: f64 = 1e-5;
pub const KINK: f64 = 1e-7;

fn to_subgraph((adjacency, features): (Array2<f64>, Array2<f64>), real: usize) -> Subgraph {
    Subgraph {
        nodes: (0..real).collect(),
        adjacency,
        features,
    }
}

/// A 2-way 1-shot toy: 6-slot subgraphs, 4 features, 8 hidden units.
pub struct GradToy {
    pub params: ModelParams,
    pub support: Vec<Subgraph>,
    pub mixed: Vec<(Array2<f64>, Array2<f64>, usize)>,
    pub queries: Vec<Subgraph>,
    pub query_labels: Vec<usize>,
}

impl GradToy {
    pub fn support_inputs(&self) -> Vec<EncoderInput<'_>> {
        self.support.iter().map(EncoderInput::from).collect()
    }

    pub fn mixed_inputs(&self) -> Vec<EncoderInput<'_>> {
        self.mixed
            .iter()
            .map(|(a, x, real)| EncoderInput {
                adjacency: a.view(),
                features: x.view(),
                real_slots: *real,
            })
            .collect()
    }

    pub fn query_inputs(&self) -> Vec<EncoderInput<'_>> {
        self.queries.iter().map(EncoderInput::from).collect()
    }

    fn min_pre_activation(&self, params: &ModelParams) -> f64 {
        let mut inputs = self.support_inputs();
        inputs.extend(self.mixed_inputs());
        inputs.extend(self.query_inputs());
        inputs
            .into_iter()
            .map(|inp| {
                let fwd = gcn_forward(inp, params).unwrap();
                fwd.pre_activation().iter().fold(f64::INFINITY, |m, z| m.min(z.abs()))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds the toy for `seed`, resampling while any pre-activation sits within `KINK` of the ReLU kink.
pub fn grad_toy(seed: u64) -> GradToy {
    for attempt in 0.. {
        let mut rng = substream(seed, "grad-toy", &[attempt]);
        let (d, h, slots) = (4, 8, 6);
        let draw = |rng: &mut cosmic_core::rng::StreamRng| {
            let real = rng.random_range(3..=slots);
            to_subgraph(random_subgraph(rng, slots, real, d), real)
        };
        let support: Vec<Subgraph> = (0..2).map(|_| draw(&mut rng)).collect();
        let partners: Vec<Subgraph> = (0..2).map(|_| draw(&mut rng)).collect();
        let queries: Vec<Subgraph> = (0..4).map(|_| draw(&mut rng)).collect();
        let mixed = support
            .iter()
            .zip(&partners)
            .map(|(a, b)| {
                let alpha = alpha_from_coefficient(rng.random::<f64>(), 10.0);
                let (la, lx) = sample_ratio_matrices(alpha, 5.0, (slots, slots), (slots, d), &mut rng).unwrap();
                let m = mix_subgraphs(a, b, &la, &lx).unwrap();
                (m.adjacency, m.features, m.real_slots)
            })
            .collect();
        let mut weight = Array2::zeros((d, h));
        weight.mapv_inplace(|_: f64| 0.7 * rng.sample::<f64, _>(StandardNormal));
        let head_weight = Array2::from_shape_simple_fn((h, 2), || 0.5 * rng.sample::<f64, _>(StandardNormal));
        let head_bias = Array1::from_shape_simple_fn(2, || 0.1 * rng.sample::<f64, _>(StandardNormal));
        let toy = GradToy {
            params: ModelParams::new(weight, head_weight, head_bias).unwrap(),
            support,
            mixed,
            queries,
            query_labels: vec![0, 1, 0, 1],
        };
        if toy.min_pre_activation(&toy.params) >= KINK {
            return toy;
        }
    }
    unreachable!()
}

fn with_weight(base: &ModelParams, w: &[f64]) -> ModelParams {
    let weight = Array2::from_shape_vec(base.weight.raw_dim(), w.to_vec()).unwrap();
    ModelParams::new(weight, base.head_weight.clone(), base.head_bias.clone()).unwrap()
}

/// Max relative gradient error per loss for one seed:
/// `[L_MC, L_MC with mix-up, L_CE, LR objective]`.
pub fn gradient_errors(seed: u64) -> [f64; 4] {
    let toy = grad_toy(seed);
    let support = toy.support_inputs();
    let mixed = toy.mixed_inputs();
    let queries = toy.query_inputs();
    let w0: Vec<f64> = toy.params.weight.iter().copied().collect();

    let lmc = |mix: bool| {
        let check = |w: &[f64]| {
            let p = with_weight(&toy.params, w);
            let (loss, g) = contrastive_gradient(&p, 2, 1, &support, mix.then_some(&mixed[..]), 0.5, SelfCorrection::SameView)
                .unwrap();
            (loss, g.iter().copied().collect())
        };
        finite_diff_check(check, &w0, GRAD_H, GRAD_TOL, GRAD_FLOOR).max_rel_error
    };

    let (d, h) = toy.params.weight.dim();
    let mut all: Vec<f64> = w0.clone();
    all.extend(toy.params.head_weight.iter());
    all.extend(toy.params.head_bias.iter());
    let ce = finite_diff_check(
        |x: &[f64]| {
            let weight = Array2::from_shape_vec((d, h), x[..d * h].to_vec()).unwrap();
            let head_weight = Array2::from_shape_vec((h, 2), x[d * h..d * h + 2 * h].to_vec()).unwrap();
            let head_bias = Array1::from_vec(x[d * h + 2 * h..].to_vec());
            let p = ModelParams::new(weight, head_weight, head_bias).unwrap();
            let (loss, g) = ce_gradient(&p, &queries, &toy.query_labels).unwrap();
            let mut flat: Vec<f64> = g.weight.iter().copied().collect();
            flat.extend(g.head_weight.iter());
            flat.extend(g.head_bias.iter());
            (loss, flat)
        },
        &all,
        GRAD_H,
        GRAD_TOL,
        GRAD_FLOOR,
    )
    .max_rel_error;

    let mut rng = substream(seed, "grad-logreg", &[]);
    let x = Array2::from_shape_simple_fn((6, 8), || rng.sample::<f64, _>(StandardNormal));
    let labels = [0, 1, 2, 0, 1, 2];
    let start: Vec<f64> = (0..8 * 3 + 3).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let lr = finite_diff_check(
        |p: &[f64]| {
            let w = Array2::from_shape_vec((8, 3), p[..24].to_vec()).unwrap();
            let b = Array1::from_vec(p[24..].to_vec());
            let (f, gw, gb) = logreg_objective(&x, &labels, 0.7, &w, &b).unwrap();
            (f, gw.iter().chain(gb.iter()).copied().collect())
        },
        &start,
        GRAD_H,
        GRAD_TOL,
        GRAD_FLOOR,
    )
    .max_rel_error;

    [lmc(false), lmc(true), ce, lr]
}

pub fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut worst = [0.0f64; 4];
    for seed in 0..20 {
        for (w, e) in worst.iter_mut().zip(gradient_errors(seed)) {
            *w = w.max(e);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst.iter().all(|&e| e < GRAD_TOL) && secs < 30.0,
        format!(
            "max rel err L_MC {:.1e}, L_MC+mixup {:.1e}, CE {:.1e}, LR {:.1e} over 20 seeds; {secs:.2}s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

/// Largest |vectorized - nested loop| over random banks for every (N, K) in {2,3,4} x {1,2,3}.
pub fn loss_oracle_gap(trials: u64) -> f64 {
    let mut gap = 0.0f64;
    for n in 2..=4 {
        for k in 1..=3 {
            for trial in 0..trials {
                let mut rng = substream(trial, "bank", &[n as u64, k as u64]);
                let original = random_views(&mut rng, n * k, 5, 0.6);
                let mixed = random_views(&mut rng, n * k, 5, 0.6);
                let tau = [0.5, 1.0, 0.2][trial as usize % 3];
                for with_mix in [false, true] {
                    let m = with_mix.then(|| mixed.clone());
                    let bank = ClassBank::new(n, k, original.clone(), m.clone(), tau).unwrap();
                    let fast = l_mc(&bank).loss;
                    let slow = l_mc_literal(n, k, &original, m.as_deref(), tau);
                    gap = gap.max((fast - slow).abs());
                }
            }
        }
    }
    gap
}

pub fn criterion_2() -> Outcome {
    let started = Instant::now();
    let gap = loss_oracle_gap(10);
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        gap <= 1e-10 && secs < 10.0,
        format!("max |vectorized - nested| = {gap:.2e} over 360 banks; {secs:.2}s"),
    )
}

/// Largest per-entry PPR error against the dense solve over 50 random graphs per zeta.
pub fn ppr_oracle_gap() -> f64 {
    let mut gap = 0.0f64;
    for zeta in [0.1, 0.15, 0.5, 0.9] {
        for graph in 0..50u64 {
            let mut rng = substream(graph, "ppr-graph-size", &[]);
            let n = rng.random_range(2..=50);
            let p = rng.random_range(0.02..0.4);
            let g = random_graph(graph, n, p);
            let dense = dense_ppr(&g, zeta);
            let cfg = PprConfig { zeta, ..PprConfig::default() };
            for v in 0..n {
                let s = compute_ppr(&g, v, &cfg).unwrap();
                for u in 0..n {
                    gap = gap.max((s.values[u] - dense[(u, v)]).abs());
                }
            }
        }
    }
    gap
}

pub fn criterion_3() -> Outcome {
    let started = Instant::now();
    let gap = ppr_oracle_gap();
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        gap <= 1e-6 && secs < 10.0,
        format!("max |series - dense| = {gap:.2e} over 200 graph/zeta pairs; {secs:.2}s"),
    )
}

pub fn criterion_4() -> Outcome {
    let mut rng = substream(4, "beta-draws", &[]);
    let (draws, _) = sample_ratio_matrices(5.0, 5.0, (100, 1000), (0, 0), &mut rng).unwrap();
    let mean = draws.mean().unwrap();
    let mean_ok = (mean - 0.5).abs() <= 0.01;

    let mut identical_ok = true;
    for trial in 0..50 {
        let mut rng = substream(trial, "identical-scores", &[]);
        let s: Vec<f64> = (0..11).map(|_| rng.random::<f64>()).collect();
        identical_ok &= bhattacharyya_alpha(&s, &s, 10.0).unwrap() == 5.0;
    }

    let grid: Vec<f64> = (0..=99).map(|i| 1.0 - 0.01 * i as f64).collect();
    let alphas: Vec<f64> = grid.iter().map(|&c| alpha_from_coefficient(c, 10.0)).collect();
    let strict = alphas.windows(2).all(|w| w[1] > w[0]);
    let in_range = alphas.iter().all(|&a| a > 0.0 && a <= 10.0);
    Outcome::new(
        mean_ok && identical_ok && strict && in_range,
        format!(
            "Beta(5,5) mean {mean:.5}; alpha(identical) = C/2: {identical_ok}; alpha strictly monotone over coefficient grid 1.0 -> 0.01 ({:.4} -> {:.4}): {strict}",
            alphas[0],
            alphas[alphas.len() - 1]
        ),
    )
}

pub fn planted_graph(seed: u64) -> (Graph, ClassSplit) {
    (
        generate_planted_partition(10, 50, 0.2, 0.02, 16, 0.5, seed).unwrap(),
        ClassSplit::contiguous(6, 2, 2),
    )
}

pub fn planted_config(seed: u64) -> TrainConfig {
    TrainConfig {
        episodes: 500,
        hidden_dim: 32,
        seed,
        ..TrainConfig::default()
    }
}

/// Trains with `cfg` on the planted graph of `seed` and returns the 2-way 1-shot summary.
pub fn train_and_evaluate(seed: u64, cfg: &TrainConfig) -> EvalSummary {
    let (g, split) = planted_graph(seed);
    let out = train(&g, &split, cfg).unwrap();
    let sampler = SubgraphSampler::new(&g, cfg.ppr(), cfg.subgraph_size, 4096).unwrap();
    let eval = EvalConfig {
        seed,
        ..EvalConfig::default()
    };
    evaluate(&g, &split, &out.params, &sampler, &eval).unwrap()
}

pub fn criterion_5() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let started = Instant::now();
    let summary = pool.install(|| train_and_evaluate(0, &planted_config(0)));
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        summary.mean >= 0.65 && secs < 300.0,
        format!("accuracy {:.4} +/- {:.4} (chance 0.5); {secs:.1}s single-threaded", summary.mean, summary.ci95),
    )
}

/// One-sided sign test: probability of at least `wins` successes in `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let choose = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    (wins..=trials).map(|k| choose(trials, k)).sum::<f64>() / 2f64.powi(trials as i32)
}

pub fn criterion_6() -> Outcome {
    use rayon::prelude::*;
    let started = Instant::now();
    let rows: Vec<[f64; 3]> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let full = planted_config(seed);
            let no_contrastive = TrainConfig {
                contrastive: false,
                ..full.clone()
            };
            let mut no_mixup = full.clone();
            no_mixup.mixup.enabled = false;
            [
                train_and_evaluate(seed, &full).mean,
                train_and_evaluate(seed, &no_contrastive).mean,
                train_and_evaluate(seed, &no_mixup).mean,
            ]
        })
        .collect();
    let mean = |c: usize| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
    let mut ok = true;
    let mut parts = vec![format!("full {:.4}", mean(0))];
    for (c, name) in [(1, "w/o contrastive"), (2, "w/o mix-up")] {
        let margin = mean(0) - mean(c);
        // evidence against the ordering: the variant beating full COSMIC
        let variant_wins = rows.iter().filter(|r| r[c] > r[0]).count();
        let ties = rows.iter().filter(|r| r[c] == r[0]).count();
        let p = sign_test_p(variant_wins, rows.len() - ties);
        ok &= margin >= 0.0 && p >= 0.05;
        parts.push(format!(
            "{name} {:.4} (margin {margin:+.4}, variant wins {variant_wins}/{}, p={p:.3})",
            mean(c),
            rows.len() - ties
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(ok, format!("{}; {secs:.1}s", parts.join(", ")))
}

/// Checkpoint, results.csv and summary.json bytes of a short single-threaded run.
pub fn run_artifacts(seed: u64, dir: &std::path::Path) -> [Vec<u8>; 3] {
    let (g, split) = planted_graph(seed);
    let cfg = TrainConfig {
        episodes: 40,
        hidden_dim: 16,
        seed,
        ..TrainConfig::default()
    };
    let out = train(&g, &split, &cfg).unwrap();
    let ckpt = dir.join("model.ckpt");
    let header = CheckpointHeader::new(&out.params, Precision::F64, seed, cfg.episodes, serde_json::to_value(&cfg).unwrap());
    save_checkpoint(&ckpt, &out.params, &header).unwrap();
    let sampler = SubgraphSampler::new(&g, cfg.ppr(), cfg.subgraph_size, 4096).unwrap();
    let eval = EvalConfig {
        num_tasks: 20,
        repetitions: 3,
        seed,
        clustering: true,
        ..EvalConfig::default()
    };
    let summary = evaluate(&g, &split, &out.params, &sampler, &eval).unwrap();
    let results = dir.join("results.csv");
    write_results_csv(&results, &summary).unwrap();
    let json = serde_json::to_vec_pretty(&summary).unwrap();
    [std::fs::read(ckpt).unwrap(), std::fs::read(results).unwrap(), json]
}

pub fn criterion_7() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pool.install(|| run_artifacts(7, a.path()));
    let second = pool.install(|| run_artifacts(7, b.path()));
    let same: Vec<bool> = first.iter().zip(&second).map(|(x, y)| x == y).collect();
    Outcome::new(
        same.iter().all(|&s| s),
        format!(
            "checkpoint identical: {}, results.csv identical: {}, summary.json identical: {}",
            same[0], same[1], same[2]
        ),
    )
}

pub fn criterion_8() -> Outcome {
    let (g, split) = planted_graph(8);
    let cfg = TrainConfig {
        episodes: 20,
        hidden_dim: 16,
        seed: 8,
        ..TrainConfig::default()
    };
    let params = train(&g, &split, &cfg).unwrap().params;
    let before = params.to_le_bytes();
    let generation = params.generation();
    let sampler = SubgraphSampler::new(&g, cfg.ppr(), cfg.subgraph_size, 4096).unwrap();
    let eval = EvalConfig {
        num_tasks: 50,
        repetitions: 2,
        clustering: true,
        ..EvalConfig::default()
    };
    evaluate(&g, &split, &params, &sampler, &eval).unwrap();
    let same = params.to_le_bytes() == before && params.generation() == generation;
    Outcome::new(same, format!("{} parameter bytes unchanged after evaluate: {same}", before.len()))
}

pub fn criterion_9() -> Outcome {
    let truth: Vec<usize> = (0..200).map(|i| i % 4).collect();
    let relabelled: Vec<usize> = truth.iter().map(|&c| (c + 1) % 4 * 10).collect();
    let perfect = nmi(&truth, &relabelled).unwrap() == 1.0 && ari(&truth, &relabelled).unwrap() == 1.0;

    let mut points = Array2::zeros((200, 3));
    let mut rng = substream(9, "blobs", &[]);
    for (i, &c) in truth.iter().enumerate() {
        points[[i, c % 3]] = 10.0 * (1 + c / 3) as f64;
        for f in 0..3 {
            points[[i, f]] += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let (kn, ka) = clustering_quality(&points, &truth, 4, 9).unwrap();
    let kmeans_perfect = kn == 1.0 && ka == 1.0;

    let mut worst = 0.0f64;
    let mut total = 0.0;
    let trials = 200;
    for t in 0..trials {
        let mut rng = substream(t, "permutation", &[]);
        let mut shuffled = truth.clone();
        shuffled.shuffle(&mut rng);
        let v = ari(&truth, &shuffled).unwrap();
        worst = worst.max(v.abs());
        total += v;
    }
    let mean = total / trials as f64;
    Outcome::new(
        perfect && kmeans_perfect && worst <= 0.05,
        format!(
            "perfect partition NMI/ARI exactly 1: {perfect}; k-means on separated blobs exactly 1: {kmeans_perfect}; permuted-label ARI mean {mean:+.4}, max |ARI| {worst:.4} over {trials} trials"
        ),
    )
}
