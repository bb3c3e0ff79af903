//! L2-regularized multinomial logistic regression, fitted by full-batch
//! gradient descent with Armijo backtracking from a zero start.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Coefficient of `||phi||^2 / 2` (weights and bias).
    pub weight_decay: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            weight_decay: 1.0,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskClassifier {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub weight_decay: f64,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub objective_trace: Vec<f64>,
}

struct Problem<'a> {
    x: &'a Array2<f64>,
    labels: &'a [usize],
    n_classes: usize,
    weight_decay: f64,
}

impl Problem<'_> {
    fn logits(&self, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        self.x.dot(w) + b
    }

    fn penalty(&self, w: &Array2<f64>, b: &Array1<f64>) -> f64 {
        0.5 * self.weight_decay * (w.iter().chain(b).map(|v| v * v).sum::<f64>())
    }

    fn objective(&self, w: &Array2<f64>, b: &Array1<f64>) -> f64 {
        let logits = self.logits(w, b);
        let mut ce = 0.0;
        for (row, &y) in logits.rows().into_iter().zip(self.labels) {
            let peak = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let lse = peak + row.iter().map(|&z| (z - peak).exp()).sum::<f64>().ln();
            ce += lse - row[y];
        }
        ce / self.labels.len() as f64 + self.penalty(w, b)
    }

    fn gradient(&self, w: &Array2<f64>, b: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut probs = self.logits(w, b);
        for (mut row, &y) in probs.rows_mut().into_iter().zip(self.labels) {
            let peak = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            row.mapv_inplace(|z| (z - peak).exp());
            let total = row.sum();
            row /= total;
            row[y] -= 1.0;
        }
        probs /= self.labels.len() as f64;
        let gw = self.x.t().dot(&probs) + w * self.weight_decay;
        let gb = probs.sum_axis(Axis(0)) + b * self.weight_decay;
        (gw, gb)
    }
}

/// Objective `mean CE + weight_decay * ||phi||^2 / 2` and its gradient at `(weight, bias)`.
pub fn logreg_objective(
    x: &Array2<f64>,
    labels: &[usize],
    weight_decay: f64,
    weight: &Array2<f64>,
    bias: &Array1<f64>,
) -> Result<(f64, Array2<f64>, Array1<f64>)> {
    if x.nrows() != labels.len() || labels.is_empty() || weight.dim() != (x.ncols(), bias.len()) {
        return Err(Error::DimensionMismatch(format!(
            "x {:?}, {} labels, weight {:?}, bias {}",
            x.dim(),
            labels.len(),
            weight.dim(),
            bias.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= bias.len()) {
        return Err(Error::InvalidParameter(format!("label {y} outside 0..{}", bias.len())));
    }
    let problem = Problem {
        x,
        labels,
        n_classes: bias.len(),
        weight_decay,
    };
    let (gw, gb) = problem.gradient(weight, bias);
    Ok((problem.objective(weight, bias), gw, gb))
}

/// Minimizes mean cross-entropy plus `weight_decay * ||phi||^2 / 2`.
///
/// Returns the last accepted iterate; `converged` is false if the gradient
/// norm never reached `tol`.
pub fn fit_task_classifier(
    x: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    cfg: &LogRegConfig,
) -> Result<TaskClassifier> {
    if x.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} rows for {} labels", x.nrows(), labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {y} outside 0..{n_classes}")));
    }
    if cfg.weight_decay.is_nan() || cfg.weight_decay < 0.0 {
        return Err(Error::InvalidParameter(format!("weight decay must be >= 0, got {}", cfg.weight_decay)));
    }
    let problem = Problem {
        x,
        labels,
        n_classes,
        weight_decay: cfg.weight_decay,
    };
    let mut w = Array2::zeros((x.ncols(), problem.n_classes));
    let mut b = Array1::zeros(problem.n_classes);
    let mut f = problem.objective(&w, &b);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let (gw, gb) = problem.gradient(&w, &b);
        let sq_norm: f64 = gw.iter().chain(&gb).map(|g| g * g).sum();
        if sq_norm.sqrt() < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        step *= 2.0;
        let mut accepted = None;
        for _ in 0..60 {
            let w_next = &w - &(&gw * step);
            let b_next = &b - &(&gb * step);
            let f_next = problem.objective(&w_next, &b_next);
            if f_next <= f - 1e-4 * step * sq_norm {
                accepted = Some((w_next, b_next, f_next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((w_next, b_next, f_next)) => {
                w = w_next;
                b = b_next;
                f = f_next;
                trace.push(f);
            }
            // no representable descent left
            None => break,
        }
    }
    if !converged {
        log::debug!("logistic regression stopped after {iterations} iterations without reaching tol");
    }
    Ok(TaskClassifier {
        weight: w,
        bias: b,
        weight_decay: cfg.weight_decay,
        iterations,
        objective: f,
        converged,
        objective_trace: trace,
    })
}

impl TaskClassifier {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut logits = x.dot(&self.weight) + &self.bias;
        for mut row in logits.rows_mut() {
            let peak = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            row.mapv_inplace(|z| (z - peak).exp());
            let total = row.sum();
            row /= total;
        }
        logits
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

pub fn predict_labels(clf: &TaskClassifier, x: &Array2<f64>) -> Vec<usize> {
    let logits = x.dot(&clf.weight) + &clf.bias;
    logits.rows().into_iter().map(|row| argmax(row.iter().copied())).collect()
}
