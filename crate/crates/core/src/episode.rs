//! N-way K-shot task sampling.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use crate::graph::Graph;
use crate::{Error, Result};

/// One N-way K-shot task. Labels are local: class `class_ids[i]` maps to `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaTask {
    pub n_way: usize,
    pub k_shot: usize,
    pub class_ids: Vec<usize>,
    /// `(node, local_label)`, class-major: entry `i * k_shot + j` is shot `j` of class `i`.
    pub support: Vec<(usize, usize)>,
    pub query: Vec<(usize, usize)>,
}

impl MetaTask {
    pub fn support_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.iter().map(|&(v, _)| v)
    }

    pub fn query_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.query.iter().map(|&(v, _)| v)
    }

    pub fn support_labels(&self) -> Vec<usize> {
        self.support.iter().map(|&(_, y)| y).collect()
    }

    pub fn query_labels(&self) -> Vec<usize> {
        self.query.iter().map(|&(_, y)| y).collect()
    }
}

/// Samples tasks from a fixed class pool of one graph.
#[derive(Clone, Debug)]
pub struct TaskSampler {
    members: BTreeMap<usize, Vec<usize>>,
}

impl TaskSampler {
    pub fn new(g: &Graph, classes: &[usize]) -> Self {
        let mut members: BTreeMap<usize, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
        for (v, &c) in g.labels().iter().enumerate() {
            if let Some(list) = members.get_mut(&c) {
                list.push(v);
            }
        }
        TaskSampler { members }
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.keys().copied()
    }

    /// Draws `n` classes uniformly among those with at least
    /// `k + ceil(q / n)` nodes, `k` support nodes per class, then `q` query
    /// nodes uniformly from the chosen classes' remaining nodes.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, k: usize, q: usize, rng: &mut R) -> Result<MetaTask> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!("n_way and k_shot must be positive (got {n}, {k})")));
        }
        if self.members.len() < n {
            return Err(Error::InfeasibleTask(format!(
                "{n}-way task needs {n} classes, pool has {}",
                self.members.len()
            )));
        }
        let needed = k + q.div_ceil(n);
        let eligible: Vec<usize> = self
            .members
            .iter()
            .filter(|(_, nodes)| nodes.len() >= needed)
            .map(|(&c, _)| c)
            .collect();
        if eligible.len() < n {
            return Err(Error::InfeasibleTask(format!(
                "only {} classes have the {needed} nodes a {n}-way {k}-shot task with {q} queries needs",
                eligible.len()
            )));
        }

        let class_ids: Vec<usize> = index::sample(rng, eligible.len(), n)
            .into_iter()
            .map(|i| eligible[i])
            .collect();
        let mut support = Vec::with_capacity(n * k);
        let mut remaining = Vec::new();
        for (local, &c) in class_ids.iter().enumerate() {
            let nodes = &self.members[&c];
            let picked = index::sample(rng, nodes.len(), k).into_vec();
            support.extend(picked.iter().map(|&i| (nodes[i], local)));
            let mut taken = vec![false; nodes.len()];
            for i in picked {
                taken[i] = true;
            }
            remaining.extend(
                nodes
                    .iter()
                    .zip(&taken)
                    .filter(|(_, &t)| !t)
                    .map(|(&v, _)| (v, local)),
            );
        }
        let query = index::sample(rng, remaining.len(), q)
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        Ok(MetaTask {
            n_way: n,
            k_shot: k,
            class_ids,
            support,
            query,
        })
    }
}

pub fn sample_meta_task<R: Rng + ?Sized>(
    g: &Graph,
    classes: &[usize],
    n: usize,
    k: usize,
    q_per_task: usize,
    rng: &mut R,
) -> Result<MetaTask> {
    TaskSampler::new(g, classes).sample(n, k, q_per_task, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted_partition;
    use crate::rng::substream;
    use std::collections::HashSet;

    fn planted() -> Graph {
        generate_planted_partition(5, 20, 0.3, 0.05, 5, 0.1, 11).unwrap()
    }

    fn check_invariants(g: &Graph, task: &MetaTask) {
        let support: HashSet<usize> = task.support_nodes().collect();
        assert_eq!(support.len(), task.support.len());
        let query: HashSet<usize> = task.query_nodes().collect();
        assert_eq!(query.len(), task.query.len());
        assert!(support.is_disjoint(&query));
        for i in 0..task.n_way {
            assert_eq!(task.support.iter().filter(|&&(_, y)| y == i).count(), task.k_shot);
        }
        for &(v, y) in task.support.iter().chain(&task.query) {
            assert_eq!(g.label(v), task.class_ids[y]);
        }
    }

    #[test]
    fn forced_selection_is_a_permutation() {
        let g = planted();
        let mut rng = substream(1, "t", &[]);
        let task = sample_meta_task(&g, &[0, 1], 2, 1, 4, &mut rng).unwrap();
        let mut ids = task.class_ids.clone();
        ids.sort();
        assert_eq!(ids, vec![0, 1]);
        check_invariants(&g, &task);
    }

    #[test]
    fn deterministic_under_seed() {
        let g = planted();
        let a = sample_meta_task(&g, &[0, 1, 2, 3], 3, 2, 10, &mut substream(5, "t", &[])).unwrap();
        let b = sample_meta_task(&g, &[0, 1, 2, 3], 3, 2, 10, &mut substream(5, "t", &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_class_is_an_error() {
        // class 1 has exactly one node
        let labels = vec![0, 0, 0, 0, 1];
        let g = Graph::from_edges(&[], ndarray::Array2::zeros((5, 1)), labels).unwrap();
        let err = sample_meta_task(&g, &[0, 1], 2, 1, 2, &mut substream(0, "t", &[])).unwrap_err();
        assert!(matches!(err, Error::InfeasibleTask(_)));
    }

    #[test]
    fn invariants_hold_across_many_draws() {
        let g = planted();
        let sampler = TaskSampler::new(&g, &[0, 1, 2, 3, 4]);
        let mut rng = substream(2, "t", &[]);
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let task = sampler.sample(2, 1, 10, &mut rng).unwrap();
            check_invariants(&g, &task);
            seen.extend(task.class_ids.iter().copied());
        }
        assert_eq!(seen.len(), 5);
    }
}
