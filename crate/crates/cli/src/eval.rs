use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use cosmic_core::encoder::load_checkpoint;
use cosmic_core::eval::{evaluate_with, export_embeddings, write_results_csv, EvalConfig, EvalSummary, GcnEmbedder, LogRegConfig, LogisticRegression};
use cosmic_core::graph::ClassSplit;
use cosmic_core::ppr::{PprConfig, SubgraphSampler};
use cosmic_core::trainer::TrainConfig;

use crate::args::EvalArgs;
use crate::settings::{data_source, default_split, require_file, split_source, ConfigFile, DataSource};
use crate::{init_workers, write_json, CliError};

/// Training context recovered from a checkpoint header.
#[derive(Debug, Deserialize)]
struct StoredMeta {
    data: DataSource,
    split: ClassSplit,
    train: TrainConfig,
}

/// Contents of summary.json.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    #[serde(flatten)]
    pub summary: EvalSummary,
    pub subgraph_size: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Serialize)]
struct EvalEcho<'a> {
    seed: u64,
    eval: &'a EvalConfig,
    subgraph_size: usize,
    zeta: f64,
    data: &'a DataSource,
    split: &'a ClassSplit,
    checkpoint_episode: usize,
    checkpoint_seed: u64,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.config.as_deref()).map_err(CliError::Usage)?;
    let checkpoint: PathBuf = file
        .pick_opt("checkpoint", args.checkpoint.clone())
        .and_then(|p| p.ok_or_else(|| anyhow!("--checkpoint is required")))
        .map_err(CliError::Usage)?;
    require_file(&checkpoint, "checkpoint").map_err(CliError::Usage)?;
    let (header, params) = load_checkpoint(&checkpoint)?;
    let stored: Option<StoredMeta> = serde_json::from_value(header.meta.clone()).ok();

    let seed = file
        .pick("seed", args.seed, stored.as_ref().map_or(header.seed, |m| m.train.seed))
        .map_err(CliError::Usage)?;
    let data = match data_source(&args.data, &file, seed).map_err(CliError::Usage)? {
        Some(d) => d,
        None => stored
            .as_ref()
            .map(|m| m.data.clone())
            .ok_or_else(|| CliError::Usage(anyhow!("checkpoint has no graph source; pass --dataset-dir or --synthetic")))?,
    };
    let graph = data.load()?;
    let split = match split_source(&args.data, &file).map_err(CliError::Usage)? {
        Some(source) => source.resolve(graph.num_classes()),
        None => match &stored {
            Some(m) if m.data == data => Ok(m.split.clone()),
            _ => default_split(&data, graph.num_classes()),
        },
    }
    .map_err(CliError::Usage)?;
    if graph.feature_dim() != params.feature_dim() {
        return Err(CliError::Runtime(anyhow!(
            "checkpoint expects {} input features but the graph has {}",
            params.feature_dim(),
            graph.feature_dim()
        )));
    }

    let trained = stored.as_ref().map(|m| m.train.clone()).unwrap_or_default();
    let resolve = || -> anyhow::Result<(EvalConfig, usize, f64, usize, PathBuf, bool)> {
        let eval = EvalConfig {
            n_way: file.pick("n-way", args.n_way, trained.n_way)?,
            k_shot: file.pick("k-shot", args.k_shot, trained.k_shot)?,
            q_per_task: file.pick("query-per-task", args.query_per_task, trained.q_per_task)?,
            num_tasks: file.pick("tasks", args.tasks, 100)?,
            repetitions: file.pick("repetitions", args.repetitions, 10)?,
            seed,
            clustering: file.switch("clustering", args.clustering.map(|s| s.enabled()), true)?,
            logreg: LogRegConfig {
                weight_decay: file.pick("weight-decay", args.weight_decay, LogRegConfig::default().weight_decay)?,
                ..LogRegConfig::default()
            },
        };
        eval.validate()?;
        if eval.logreg.weight_decay.is_nan() || eval.logreg.weight_decay < 0.0 {
            bail!("weight decay must be non-negative");
        }
        Ok((
            eval,
            file.pick("subgraph-size", args.subgraph_size, trained.subgraph_size)?,
            file.pick("zeta", args.zeta, trained.zeta)?,
            file.pick("workers", args.workers, 0)?,
            file.pick("out", args.out.clone(), PathBuf::from("runs/eval"))?,
            file.flag("export-embeddings", args.export_embeddings)?,
        ))
    };
    let (eval, subgraph_size, zeta, workers, out, export) = resolve().map_err(CliError::Usage)?;
    init_workers(workers)?;
    let ppr = PprConfig {
        zeta,
        ..PprConfig::default()
    };
    let sampler = SubgraphSampler::new(&graph, ppr, subgraph_size, 1 << 16).map_err(|e| CliError::Usage(e.into()))?;
    let embedder = GcnEmbedder::new(&params, &sampler);
    let classifier = LogisticRegression { config: eval.logreg };
    let summary = evaluate_with(&graph, &split, &embedder, &classifier, &eval)?;

    fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let echo = EvalEcho {
        seed,
        eval: &eval,
        subgraph_size,
        zeta,
        data: &data,
        split: &split,
        checkpoint_episode: header.episode,
        checkpoint_seed: header.seed,
    };
    let mut full_echo = serde_json::to_value(&echo).map_err(anyhow::Error::from)?;
    full_echo["command"] = "eval".into();
    full_echo["checkpoint"] = checkpoint.display().to_string().into();
    full_echo["workers"] = workers.into();
    full_echo["out"] = out.display().to_string().into();
    write_json(&out.join("config_echo.json"), &full_echo)?;
    write_results_csv(out.join("results.csv"), &summary)?;
    write_json(
        &out.join("summary.json"),
        &SummaryFile {
            summary: summary.clone(),
            subgraph_size,
            config: serde_json::to_value(&echo).map_err(anyhow::Error::from)?,
        },
    )?;
    if export {
        export_embeddings(&graph, &split, &embedder, out.join("embeddings.csv"))?;
    }
    println!(
        "accuracy: {:.4} ± {:.4} ({}-way {}-shot, {} repetitions x {} tasks)",
        summary.mean, summary.ci95, summary.n_way, summary.k_shot, summary.repetitions, summary.num_tasks
    );
    if let (Some(nmi), Some(ari)) = (summary.nmi, summary.ari) {
        println!("clustering: NMI {nmi:.4}, ARI {ari:.4}");
    }
    Ok(())
}
