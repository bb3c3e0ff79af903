use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use cosmic_core::contrastive::SelfCorrection;
use cosmic_core::encoder::{save_checkpoint, CheckpointHeader, ModelParams, Precision};
use cosmic_core::graph::ClassSplit;
use cosmic_core::mixup::MixupConfig;
use cosmic_core::trainer::{train_with, write_episode_log, TrainConfig, TrainEvent};

use crate::args::{PrecisionArg, SelfCorrectionArg, TrainArgs};
use crate::settings::{data_source, default_split, split_source, ConfigFile, DataSource, SplitSource};
use crate::{init_workers, write_json, CliError};

/// Checkpoint file written at the end of training.
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug)]
pub struct TrainSettings {
    pub data: DataSource,
    pub split: Option<SplitSource>,
    pub train: TrainConfig,
    pub workers: usize,
    pub out: PathBuf,
}

/// Training context stored in checkpoint headers.
#[derive(Serialize)]
pub struct CheckpointMeta<'a> {
    pub data: &'a DataSource,
    pub split: &'a ClassSplit,
    pub train: &'a TrainConfig,
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    command: &'static str,
    seed: u64,
    data: &'a DataSource,
    split: &'a ClassSplit,
    train: &'a TrainConfig,
    workers: usize,
    out: &'a Path,
}

pub fn resolve(args: &TrainArgs, file: &ConfigFile) -> anyhow::Result<TrainSettings> {
    let d = TrainConfig::default();
    let seed = file.pick("seed", args.seed, d.seed)?;
    let Some(data) = data_source(&args.data, file, seed)? else {
        bail!("no graph given: pass --dataset-dir DIR or --synthetic");
    };
    let precision = match args.precision {
        Some(PrecisionArg::F32) => Precision::F32,
        Some(PrecisionArg::F64) => Precision::F64,
        None => file.pick("precision", None, d.precision)?,
    };
    let self_correction = match args.self_correction.map(|s| s.to_string()).or_else(|| file.raw("self-correction").map(String::from)) {
        None => d.self_correction,
        Some(s) if s == "same-view" => SelfCorrection::SameView,
        Some(s) if s == "central-only" => SelfCorrection::CentralOnly,
        Some(s) => bail!("invalid value '{s}' for self-correction: expected same-view or central-only"),
    };
    let train = TrainConfig {
        episodes: file.pick("episodes", args.episodes, d.episodes)?,
        n_way: file.pick("n-way", args.n_way, d.n_way)?,
        k_shot: file.pick("k-shot", args.k_shot, d.k_shot)?,
        q_per_task: file.pick("query-per-task", args.query_per_task, d.q_per_task)?,
        lr_mc: file.pick("lr-mc", args.lr_mc, d.lr_mc)?,
        lr_ce: file.pick("lr-ce", args.lr_ce, d.lr_ce)?,
        tau: file.pick("tau", args.tau, d.tau)?,
        zeta: file.pick("zeta", args.zeta, d.zeta)?,
        subgraph_size: file.pick("subgraph-size", args.subgraph_size, d.subgraph_size)?,
        hidden_dim: file.pick("hidden-dim", args.hidden_dim, d.hidden_dim)?,
        mixup: MixupConfig {
            enabled: file.switch("mixup", args.mixup.map(|s| s.enabled()), d.mixup.enabled)?,
            beta: file.pick("mixup-beta", args.mixup_beta, d.mixup.beta)?,
            magnitude: file.pick("mixup-c", args.mixup_c, d.mixup.magnitude)?,
        },
        contrastive: file.switch("contrastive", args.contrastive.map(|s| s.enabled()), d.contrastive)?,
        self_correction,
        precision,
        seed,
        checkpoint_every: file.pick("checkpoint-every", args.checkpoint_every, d.checkpoint_every)?,
        cache_capacity: d.cache_capacity,
    };
    train.validate()?;
    Ok(TrainSettings {
        data,
        split: split_source(&args.data, file)?,
        train,
        workers: file.pick("workers", args.workers, 0)?,
        out: file.pick("out", args.out.clone(), PathBuf::from("runs/train"))?,
    })
}

fn write_checkpoint(path: &Path, params: &ModelParams, cfg: &TrainConfig, episode: usize, meta: &CheckpointMeta<'_>) -> anyhow::Result<()> {
    let header = CheckpointHeader::new(params, cfg.precision, cfg.seed, episode, serde_json::to_value(meta)?);
    save_checkpoint(path, params, &header)?;
    Ok(())
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.config.as_deref()).map_err(CliError::Usage)?;
    let settings = resolve(&args, &file).map_err(CliError::Usage)?;
    init_workers(settings.workers)?;
    let graph = settings.data.load()?;
    let split = match &settings.split {
        Some(source) => source.resolve(graph.num_classes()),
        None => default_split(&settings.data, graph.num_classes()),
    }
    .map_err(CliError::Usage)?;
    let cfg = &settings.train;
    let out = &settings.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    write_json(
        &out.join("config_echo.json"),
        &TrainEcho {
            command: "train",
            seed: cfg.seed,
            data: &settings.data,
            split: &split,
            train: cfg,
            workers: settings.workers,
            out,
        },
    )?;
    split.save(out.join("split.json"))?;
    if matches!(settings.data, DataSource::Dataset { .. }) {
        graph.write_node_map(out.join("node_map.tsv"))?;
    }
    log::info!(
        "training on {} nodes, {} edges, {} classes ({} train / {} val / {} test)",
        graph.num_nodes(),
        graph.num_edges(),
        graph.num_classes(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );

    let meta = CheckpointMeta {
        data: &settings.data,
        split: &split,
        train: cfg,
    };
    let outcome = train_with(&graph, &split, cfg, |event| {
        match event {
            TrainEvent::Episode(report) => {
                if (report.episode + 1) % 50 == 0 || report.episode + 1 == cfg.episodes {
                    log::info!(
                        "episode {}/{}: L_MC {:.4}, L_CE {:.4}",
                        report.episode + 1,
                        cfg.episodes,
                        report.loss_mc,
                        report.loss_ce
                    );
                }
            }
            TrainEvent::Checkpoint { episode, params } => {
                let path = out.join(format!("checkpoint_{episode:06}.ckpt"));
                write_checkpoint(&path, params, cfg, episode, &meta)
                    .map_err(|e| cosmic_core::Error::Checkpoint(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(())
    })?;
    write_episode_log(out.join("episode_log.csv"), &outcome.reports)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    write_checkpoint(&ckpt, &outcome.params, cfg, cfg.episodes, &meta)?;
    let tail = outcome.reports.len().min(50);
    let recent = &outcome.reports[outcome.reports.len() - tail..];
    let mean = |f: fn(&cosmic_core::trainer::EpisodeReport) -> f64| recent.iter().map(f).sum::<f64>() / tail.max(1) as f64;
    println!(
        "trained {} episodes; last {tail}: L_MC {:.4}, L_CE {:.4}",
        cfg.episodes,
        mean(|r| r.loss_mc),
        mean(|r| r.loss_ce)
    );
    println!("checkpoint: {}", ckpt.display());
    Ok(())
}

impl std::fmt::Display for SelfCorrectionArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelfCorrectionArg::SameView => "same-view",
            SelfCorrectionArg::CentralOnly => "central-only",
        })
    }
}
