//! Layered option resolution: command line, then config file, then defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use cosmic_core::graph::{load_class_split, load_graph, ClassSplit, Graph, PlantedPartition};

use crate::args::DataArgs;

/// Every key accepted in a config file.
const KNOWN_KEYS: &[&str] = &[
    "dataset-dir",
    "synthetic",
    "split",
    "split-sizes",
    "synthetic-classes",
    "synthetic-nodes-per-class",
    "p-in",
    "p-out",
    "feat-dim",
    "feat-noise",
    "graph-seed",
    "n-way",
    "k-shot",
    "query-per-task",
    "episodes",
    "subgraph-size",
    "zeta",
    "tau",
    "hidden-dim",
    "lr-mc",
    "lr-ce",
    "mixup",
    "mixup-c",
    "mixup-beta",
    "contrastive",
    "self-correction",
    "precision",
    "seed",
    "checkpoint-every",
    "workers",
    "out",
    "checkpoint",
    "tasks",
    "repetitions",
    "weight-decay",
    "clustering",
    "export-embeddings",
];

/// Values read from a key=value config file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown key '{key}'", path.display(), idx + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    fn parse<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                anyhow!(
                    "{}: invalid value '{raw}' for {key}: {e}",
                    self.path.as_deref().unwrap_or(Path::new("config")).display()
                )
            }),
        }
    }

    /// Command-line value, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, cli: Option<T>, default: T) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        Ok(self.pick_opt(key, cli)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, key: &str, cli: Option<T>) -> anyhow::Result<Option<T>>
    where
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.parse(key),
        }
    }

    pub fn flag(&self, key: &str, cli: bool) -> anyhow::Result<bool> {
        if cli {
            return Ok(true);
        }
        Ok(self.parse::<bool>(key)?.unwrap_or(false))
    }

    /// Parses a switch value ("on"/"off"/"true"/"false").
    pub fn switch(&self, key: &str, cli: Option<bool>, default: bool) -> anyhow::Result<bool> {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.values.get(key).map(|s| s.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) if v == "on" || v == "true" => Ok(true),
            Some(v) if v == "off" || v == "false" => Ok(false),
            Some(v) => bail!("invalid value '{v}' for {key}: expected on or off"),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Where the graph comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Dataset { dir: PathBuf },
    Synthetic(PlantedPartition),
}

impl DataSource {
    pub fn load(&self) -> anyhow::Result<Graph> {
        match self {
            DataSource::Dataset { dir } => Ok(load_graph(dir)?),
            DataSource::Synthetic(p) => Ok(p.generate()?),
        }
    }
}

/// How the class split is obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitSource {
    File(PathBuf),
    Sizes(usize, usize, usize),
}

impl SplitSource {
    pub fn resolve(&self, num_classes: usize) -> anyhow::Result<ClassSplit> {
        match self {
            SplitSource::File(path) => Ok(load_class_split(path, num_classes)?),
            SplitSource::Sizes(tr, va, te) => {
                let split = ClassSplit::contiguous(*tr, *va, *te);
                split.validate(num_classes)?;
                Ok(split)
            }
        }
    }
}

fn parse_sizes(raw: &str) -> anyhow::Result<(usize, usize, usize)> {
    let parts: Vec<usize> = raw
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("split sizes must look like 6,2,2, got '{raw}'"))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => bail!("split sizes must have three entries, got '{raw}'"),
    }
}

pub fn require_dir(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("{what} {} does not exist or is not a directory", path.display());
    }
    Ok(())
}

pub fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

/// Resolves the graph source. Returns `None` when neither a dataset nor `--synthetic` was requested.
pub fn data_source(args: &DataArgs, file: &ConfigFile, seed: u64) -> anyhow::Result<Option<DataSource>> {
    let dataset: Option<PathBuf> = file.pick_opt("dataset-dir", args.dataset_dir.clone())?;
    let synthetic = file.flag("synthetic", args.synthetic)?;
    if args.dataset_dir.is_some() && synthetic || dataset.is_some() && args.synthetic {
        bail!("--dataset-dir and --synthetic are mutually exclusive");
    }
    if let Some(dir) = dataset.filter(|_| !args.synthetic) {
        require_dir(&dir, "dataset directory")?;
        return Ok(Some(DataSource::Dataset { dir }));
    }
    if !synthetic {
        return Ok(None);
    }
    Ok(Some(DataSource::Synthetic(PlantedPartition {
        num_classes: file.pick("synthetic-classes", args.synthetic_classes, 10)?,
        nodes_per_class: file.pick("synthetic-nodes-per-class", args.synthetic_nodes_per_class, 50)?,
        p_in: file.pick("p-in", args.p_in, 0.2)?,
        p_out: file.pick("p-out", args.p_out, 0.02)?,
        feat_dim: file.pick("feat-dim", args.feat_dim, 16)?,
        feat_noise: file.pick("feat-noise", args.feat_noise, 0.5)?,
        seed: file.pick("graph-seed", args.graph_seed, seed)?,
    })))
}

/// Resolves the split source; `None` if nothing was specified.
pub fn split_source(args: &DataArgs, file: &ConfigFile) -> anyhow::Result<Option<SplitSource>> {
    if let Some(path) = file.pick_opt::<PathBuf>("split", args.split.clone())? {
        require_file(&path, "split file")?;
        return Ok(Some(SplitSource::File(path)));
    }
    match args.split_sizes.as_deref().or(file.raw("split-sizes")) {
        Some(raw) => {
            let (a, b, c) = parse_sizes(raw)?;
            Ok(Some(SplitSource::Sizes(a, b, c)))
        }
        None => Ok(None),
    }
}

/// Split used when none is given: `split.json` inside a dataset directory, else 60/20/20 of the classes.
pub fn default_split(source: &DataSource, num_classes: usize) -> anyhow::Result<ClassSplit> {
    if let DataSource::Dataset { dir } = source {
        let path = dir.join("split.json");
        if path.is_file() {
            return Ok(load_class_split(&path, num_classes)?);
        }
    }
    let test = (num_classes / 5).max(1);
    let val = (num_classes / 5).max(1);
    if num_classes < test + val + 2 {
        bail!("graph has only {num_classes} classes; pass --split or --split-sizes");
    }
    let split = ClassSplit::contiguous(num_classes - test - val, val, test);
    split.validate(num_classes)?;
    Ok(split)
}
