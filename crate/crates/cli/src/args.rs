use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cosmic", version, about = "Contrastive meta-learning for few-shot node classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Meta-train an encoder and write a checkpoint plus an episode log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on meta-test tasks drawn from the test classes.
    Eval(EvalArgs),
    /// Tabulate several summary.json files.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn enabled(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelfCorrectionArg {
    SameView,
    CentralOnly,
}

/// Options shared by commands that read a graph.
#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Directory containing edges.tsv, features.tsv and labels.tsv.
    #[arg(long, conflicts_with = "synthetic")]
    pub dataset_dir: Option<PathBuf>,
    /// Use a generated planted-partition graph instead of a dataset.
    #[arg(long)]
    pub synthetic: bool,
    /// JSON class split ({"train": [...], "val": [...], "test": [...]}).
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Contiguous class split "train,val,test" used when no split file is given.
    #[arg(long)]
    pub split_sizes: Option<String>,
    #[arg(long)]
    pub synthetic_classes: Option<usize>,
    #[arg(long)]
    pub synthetic_nodes_per_class: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long)]
    pub feat_dim: Option<usize>,
    #[arg(long)]
    pub feat_noise: Option<f64>,
    /// Seed of the synthetic graph (defaults to --seed).
    #[arg(long)]
    pub graph_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Plain-text key=value file; keys are long flag names without dashes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub n_way: Option<usize>,
    #[arg(long)]
    pub k_shot: Option<usize>,
    #[arg(long)]
    pub query_per_task: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub subgraph_size: Option<usize>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub lr_mc: Option<f64>,
    #[arg(long)]
    pub lr_ce: Option<f64>,
    #[arg(long, value_enum)]
    pub mixup: Option<Switch>,
    #[arg(long)]
    pub mixup_c: Option<f64>,
    #[arg(long)]
    pub mixup_beta: Option<f64>,
    /// Run the contrastive adaptation step (off trains with cross-entropy only).
    #[arg(long, value_enum)]
    pub contrastive: Option<Switch>,
    #[arg(long, value_enum)]
    pub self_correction: Option<SelfCorrectionArg>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write an intermediate checkpoint every N episodes (0 disables).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Worker threads (0 uses all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint written by `cosmic train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub n_way: Option<usize>,
    #[arg(long)]
    pub k_shot: Option<usize>,
    #[arg(long)]
    pub query_per_task: Option<usize>,
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Also report NMI/ARI of k-means over test-class embeddings.
    #[arg(long, value_enum)]
    pub clustering: Option<Switch>,
    #[arg(long)]
    pub subgraph_size: Option<usize>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write embeddings.csv for the test-class nodes.
    #[arg(long)]
    pub export_embeddings: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// summary.json files, or run directories containing one.
    pub summaries: Vec<PathBuf>,
    /// Where to write the aggregated CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
