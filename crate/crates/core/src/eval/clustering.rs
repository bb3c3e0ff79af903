//! k-means and partition-agreement metrics (NMI, ARI).

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::rng::substream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &Array2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    centroids.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = points.rows().into_iter().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: &Array2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeansResult {
    let k = centroids.nrows();
    let mut assignments = vec![usize::MAX; points.nrows()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.rows().into_iter().enumerate() {
            let best = (0..k)
                .map(|c| (c, sq_dist(p, centroids.row(c))))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
                .0;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, p) in points.rows().into_iter().enumerate() {
            sums.row_mut(assignments[i]).scaled_add(1.0, &p);
            counts[assignments[i]] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            // empty clusters keep their previous centroid
            if count > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
            }
        }
    }
    let inertia = points
        .rows()
        .into_iter()
        .zip(&assignments)
        .map(|(p, &c)| sq_dist(p, centroids.row(c)))
        .sum();
    KMeansResult {
        assignments,
        centroids,
        inertia,
    }
}

/// k-means with k-means++ seeding; keeps the restart with the lowest inertia.
pub fn kmeans(points: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || points.nrows() < k {
        return Err(Error::InvalidParameter(format!(
            "k-means needs at least k points (k={k}, points={})",
            points.nrows()
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = substream(seed, "kmeans", &[restart as u64]);
        let run = lloyd(points, plus_plus_seeds(points, k, &mut rng), 300);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

struct Contingency {
    n: usize,
    cells: HashMap<(usize, usize), usize>,
    rows: HashMap<usize, usize>,
    cols: HashMap<usize, usize>,
}

fn contingency(a: &[usize], b: &[usize]) -> Contingency {
    let mut cells = HashMap::new();
    let mut rows = HashMap::new();
    let mut cols = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    Contingency {
        n: a.len(),
        cells,
        rows,
        cols,
    }
}

impl Contingency {
    /// True when the two partitions are identical up to relabelling.
    fn is_bijective(&self) -> bool {
        self.cells.len() == self.rows.len() && self.cells.len() == self.cols.len()
    }
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "partitions of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn sorted_counts(map: &HashMap<usize, usize>) -> Vec<usize> {
    let mut v: Vec<usize> = map.values().copied().collect();
    v.sort_unstable();
    v
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    let table = contingency(a, b);
    if table.is_bijective() {
        return Ok(1.0);
    }
    let n = table.n as f64;
    let h_a = entropy(&sorted_counts(&table.rows), n);
    let h_b = entropy(&sorted_counts(&table.cols), n);
    let mut cells: Vec<((usize, usize), usize)> = table.cells.iter().map(|(&k, &v)| (k, v)).collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&((x, y), c)| {
            let c = c as f64;
            let (ra, cb) = (table.rows[&x] as f64, table.cols[&y] as f64);
            (c / n) * (c * n / (ra * cb)).ln()
        })
        .sum();
    let denom = 0.5 * (h_a + h_b);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn choose2(c: usize) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    let table = contingency(a, b);
    let mut cells: Vec<usize> = table.cells.values().copied().collect();
    cells.sort_unstable();
    let index: f64 = cells.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = sorted_counts(&table.rows).iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = sorted_counts(&table.cols).iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(table.n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // both partitions trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Clusters `embeddings` into `k` groups and scores the clustering against `labels`.
pub fn clustering_quality(embeddings: &Array2<f64>, labels: &[usize], k: usize, seed: u64) -> Result<(f64, f64)> {
    if embeddings.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} embeddings for {} labels",
            embeddings.nrows(),
            labels.len()
        )));
    }
    let clusters = kmeans(embeddings, k, 10, seed)?;
    Ok((nmi(&clusters.assignments, labels)?, ari(&clusters.assignments, labels)?))
}
