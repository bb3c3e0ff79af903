//! Meta-test evaluation with a frozen encoder: per-task classifiers,
//! accuracy summaries, clustering metrics and embedding export.

mod clustering;
mod logreg;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clustering::{ari, clustering_quality, kmeans, nmi, KMeansResult};
pub use logreg::{argmax, fit_task_classifier, logreg_objective, predict_labels, LogRegConfig, TaskClassifier};

use crate::encoder::{gcn_forward, views, EncoderInput, ModelParams};
use crate::episode::{MetaTask, TaskSampler};
use crate::graph::{ClassSplit, Graph};
use crate::ppr::SubgraphSampler;
use crate::rng::substream;
use crate::{Error, Result};

/// Maps nodes to fixed-length embeddings.
pub trait Embedder: Sync {
    fn embed(&self, nodes: &[usize]) -> Result<Array2<f64>>;
}

/// Mean-pooled subgraph view of a trained GCN encoder.
pub struct GcnEmbedder<'a, 'g> {
    params: &'a ModelParams,
    sampler: &'a SubgraphSampler<'g>,
}

impl<'a, 'g> GcnEmbedder<'a, 'g> {
    pub fn new(params: &'a ModelParams, sampler: &'a SubgraphSampler<'g>) -> Self {
        GcnEmbedder { params, sampler }
    }
}

impl Embedder for GcnEmbedder<'_, '_> {
    fn embed(&self, nodes: &[usize]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((nodes.len(), self.params.hidden_dim()));
        for (row, &v) in nodes.iter().enumerate() {
            let ctx = self.sampler.context(v)?;
            let fwd = gcn_forward(EncoderInput::from(&ctx.subgraph), self.params)?;
            out.row_mut(row).assign(&views(&fwd).pooled);
        }
        Ok(out)
    }
}

/// Predicts local query labels from support embeddings.
pub trait FewShotClassifier: Sync {
    fn predict(&self, task: &MetaTask, support: &Array2<f64>, query: &Array2<f64>) -> Result<Vec<usize>>;
}

/// Per-task L2 logistic regression.
#[derive(Clone, Copy, Debug, Default)]
pub struct LogisticRegression {
    pub config: LogRegConfig,
}

impl FewShotClassifier for LogisticRegression {
    fn predict(&self, task: &MetaTask, support: &Array2<f64>, query: &Array2<f64>) -> Result<Vec<usize>> {
        let clf = fit_task_classifier(support, &task.support_labels(), task.n_way, &self.config)?;
        if !clf.converged {
            log::debug!("task classifier stopped after {} iterations without converging", clf.iterations);
        }
        Ok(predict_labels(&clf, query))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub q_per_task: usize,
    pub num_tasks: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Also compute NMI/ARI over all test-class nodes.
    pub clustering: bool,
    pub logreg: LogRegConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_way: 2,
            k_shot: 1,
            q_per_task: 10,
            num_tasks: 100,
            repetitions: 10,
            seed: 0,
            clustering: false,
            logreg: LogRegConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 || self.k_shot == 0 || self.q_per_task == 0 {
            return Err(Error::InvalidParameter(format!(
                "evaluation needs n_way >= 2, k_shot >= 1 and q_per_task >= 1 (got {}, {}, {})",
                self.n_way, self.k_shot, self.q_per_task
            )));
        }
        if self.num_tasks == 0 || self.repetitions == 0 {
            return Err(Error::InvalidParameter("num_tasks and repetitions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_way: usize,
    pub k_shot: usize,
    pub num_tasks: usize,
    pub repetitions: usize,
    /// Mean query accuracy of each repetition.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval over repetitions.
    pub ci95: f64,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
}

/// Mean and `1.96 * stdev / sqrt(n)` (sample standard deviation).
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

fn task_accuracy(task: &MetaTask, embedder: &dyn Embedder, classifier: &dyn FewShotClassifier) -> Result<f64> {
    let support_nodes: Vec<usize> = task.support_nodes().collect();
    let query_nodes: Vec<usize> = task.query_nodes().collect();
    let support = embedder.embed(&support_nodes)?;
    let query = embedder.embed(&query_nodes)?;
    let predicted = classifier.predict(task, &support, &query)?;
    if predicted.len() != query_nodes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} queries",
            predicted.len(),
            query_nodes.len()
        )));
    }
    let correct = predicted.iter().zip(task.query_labels()).filter(|(p, y)| **p == *y).count();
    Ok(correct as f64 / query_nodes.len() as f64)
}

/// Nodes of the test classes in ascending id order, with their global labels.
pub fn test_nodes(g: &Graph, split: &ClassSplit) -> Vec<(usize, usize)> {
    (0..g.num_nodes())
        .filter(|&v| split.test.contains(&g.label(v)))
        .map(|v| (v, g.label(v)))
        .collect()
}

/// Runs the meta-test protocol over the test classes of `split`.
pub fn evaluate_with(
    g: &Graph,
    split: &ClassSplit,
    embedder: &dyn Embedder,
    classifier: &dyn FewShotClassifier,
    cfg: &EvalConfig,
) -> Result<EvalSummary> {
    cfg.validate()?;
    split.validate(g.num_classes())?;
    let sampler = TaskSampler::new(g, &split.test);
    let mut accuracies = Vec::with_capacity(cfg.repetitions);
    for r in 0..cfg.repetitions {
        let mut rng = substream(cfg.seed, "eval", &[r as u64]);
        let tasks = (0..cfg.num_tasks)
            .map(|_| sampler.sample(cfg.n_way, cfg.k_shot, cfg.q_per_task, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let per_task = tasks
            .par_iter()
            .map(|task| task_accuracy(task, embedder, classifier))
            .collect::<Result<Vec<f64>>>()?;
        let acc = per_task.iter().sum::<f64>() / per_task.len() as f64;
        log::info!("repetition {r}: accuracy {acc:.4}");
        accuracies.push(acc);
    }
    let (mean, ci95) = mean_ci95(&accuracies);
    let (nmi, ari) = if cfg.clustering {
        let nodes = test_nodes(g, split);
        let ids: Vec<usize> = nodes.iter().map(|&(v, _)| v).collect();
        let labels: Vec<usize> = nodes.iter().map(|&(_, y)| y).collect();
        let emb = embedder.embed(&ids)?;
        let (nmi, ari) = clustering_quality(&emb, &labels, split.test.len(), substream_seed(cfg.seed))?;
        (Some(nmi), Some(ari))
    } else {
        (None, None)
    };
    Ok(EvalSummary {
        n_way: cfg.n_way,
        k_shot: cfg.k_shot,
        num_tasks: cfg.num_tasks,
        repetitions: cfg.repetitions,
        accuracies,
        mean,
        ci95,
        nmi,
        ari,
    })
}

fn substream_seed(seed: u64) -> u64 {
    use rand::RngCore;
    substream(seed, "cluster", &[]).next_u64()
}

/// Evaluates trained parameters with the GCN embedder and per-task logistic regression.
pub fn evaluate(g: &Graph, split: &ClassSplit, params: &ModelParams, sampler: &SubgraphSampler<'_>, cfg: &EvalConfig) -> Result<EvalSummary> {
    let embedder = GcnEmbedder::new(params, sampler);
    let classifier = LogisticRegression { config: cfg.logreg };
    evaluate_with(g, split, &embedder, &classifier, cfg)
}

/// Writes `n_way,k_shot,repetition,accuracy` rows.
pub fn write_results_csv(path: impl AsRef<Path>, summary: &EvalSummary) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("n_way,k_shot,repetition,accuracy\n");
    for (r, acc) in summary.accuracies.iter().enumerate() {
        writeln!(out, "{},{},{},{}", summary.n_way, summary.k_shot, r, acc).expect("write to string");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Renders test-class node embeddings as CSV: original id, class, then one column per dimension.
pub fn embeddings_csv(g: &Graph, split: &ClassSplit, embedder: &dyn Embedder) -> Result<String> {
    let nodes = test_nodes(g, split);
    let ids: Vec<usize> = nodes.iter().map(|&(v, _)| v).collect();
    let emb = embedder.embed(&ids)?;
    let mut out = String::from("node_id,class");
    for j in 0..emb.ncols() {
        write!(out, ",f{j}").expect("write to string");
    }
    out.push('\n');
    for (row, &(v, y)) in nodes.iter().enumerate() {
        write!(out, "{},{}", g.original_id(v), y).expect("write to string");
        for x in emb.row(row) {
            write!(out, ",{x}").expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_embeddings(g: &Graph, split: &ClassSplit, embedder: &dyn Embedder, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv = embeddings_csv(g, split, embedder)?;
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted_partition;
    use ndarray::Array2;
    use rand::Rng;

    /// Embeds every node as its one-hot class vector.
    struct ClassOneHot<'g>(&'g Graph);

    impl Embedder for ClassOneHot<'_> {
        fn embed(&self, nodes: &[usize]) -> Result<Array2<f64>> {
            let mut out = Array2::zeros((nodes.len(), self.0.num_classes()));
            for (r, &v) in nodes.iter().enumerate() {
                out[[r, self.0.label(v)]] = 1.0;
            }
            Ok(out)
        }
    }

    /// Embeds nodes as noise that carries no label information.
    struct Noise;

    impl Embedder for Noise {
        fn embed(&self, nodes: &[usize]) -> Result<Array2<f64>> {
            let mut out = Array2::zeros((nodes.len(), 4));
            for (r, &v) in nodes.iter().enumerate() {
                let mut rng = substream(99, "noise", &[v as u64]);
                for x in out.row_mut(r) {
                    *x = rng.random::<f64>();
                }
            }
            Ok(out)
        }
    }

    /// Returns the true query labels.
    struct Oracle;

    impl FewShotClassifier for Oracle {
        fn predict(&self, task: &MetaTask, _: &Array2<f64>, _: &Array2<f64>) -> Result<Vec<usize>> {
            Ok(task.query_labels())
        }
    }

    fn toy() -> (Graph, ClassSplit) {
        let g = generate_planted_partition(6, 20, 0.3, 0.05, 8, 0.5, 4).unwrap();
        (g, ClassSplit::contiguous(2, 1, 3))
    }

    #[test]
    fn oracle_classifier_scores_perfectly() {
        let (g, split) = toy();
        let cfg = EvalConfig { num_tasks: 20, repetitions: 5, ..Default::default() };
        let s = evaluate_with(&g, &split, &Noise, &Oracle, &cfg).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.ci95, 0.0);
        assert_eq!(s.accuracies, vec![1.0; 5]);
    }

    #[test]
    fn class_one_hot_embedding_is_solved_by_logreg() {
        let (g, split) = toy();
        let cfg = EvalConfig { num_tasks: 10, repetitions: 2, clustering: true, ..Default::default() };
        let s = evaluate_with(&g, &split, &ClassOneHot(&g), &LogisticRegression::default(), &cfg).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.nmi, Some(1.0));
        assert_eq!(s.ari, Some(1.0));
    }

    #[test]
    fn uninformative_embeddings_are_at_chance() {
        let (g, split) = toy();
        let cfg = EvalConfig { num_tasks: 1000, repetitions: 1, seed: 5, ..Default::default() };
        let s = evaluate_with(&g, &split, &Noise, &LogisticRegression::default(), &cfg).unwrap();
        assert!((s.mean - 0.5).abs() < 0.05, "accuracy {}", s.mean);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (g, split) = toy();
        let cfg = EvalConfig { num_tasks: 30, repetitions: 3, seed: 11, ..Default::default() };
        let a = evaluate_with(&g, &split, &Noise, &LogisticRegression::default(), &cfg).unwrap();
        let b = evaluate_with(&g, &split, &Noise, &LogisticRegression::default(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ci_formula() {
        let (m, ci) = mean_ci95(&[0.5, 0.7]);
        assert!((m - 0.6).abs() < 1e-15);
        let sd = (0.02f64).sqrt();
        assert!((ci - 1.96 * sd / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn embedding_csv_shape() {
        let (g, split) = toy();
        let csv = embeddings_csv(&g, &split, &Noise).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "node_id,class,f0,f1,f2,f3");
        assert_eq!(lines.len(), 1 + 60);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    }
}
