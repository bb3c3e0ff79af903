//! Mutual-information contrastive loss over the support set of an episode,
//! optionally extended with mixed-up classes.
//!
//! Every node carries two views (central embedding and mean-pooled subgraph).
//! For an anchor `a` and a class `C`, the MI term sums `exp(f_t(a) . f_r(b) / tau)`
//! over both anchor views `t`, every member `b` of `C` and both member views
//! `r`; when `C` is the anchor's own class the anchor's same-view self-pairs
//! are left out. The per-anchor loss is
//! `-ln(MI(a, own class) / sum of MI(a, every other class))`.

use ndarray::{Array1, Array2};

use crate::encoder::ViewPair;
use crate::{Error, Result};

pub const NUM_VIEWS: usize = 2;

/// Which self-pairs the own-class MI term leaves out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfCorrection {
    /// Every same-view self-similarity `f_t(a) . f_t(a)`, `t = 1..V`.
    #[default]
    SameView,
    /// Only the central-view self-similarity.
    CentralOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pool {
    Original,
    Mixed,
}

/// Views of the N x K support nodes, and optionally of their N x K mixed counterparts.
#[derive(Clone, Debug)]
pub struct ClassBank {
    n_way: usize,
    k_shot: usize,
    original: Vec<ViewPair>,
    mixed: Option<Vec<ViewPair>>,
    tau: f64,
    self_correction: SelfCorrection,
}

impl ClassBank {
    /// `original[i * k_shot + j]` is shot `j` of class `i`; `mixed` uses the same layout.
    pub fn new(
        n_way: usize,
        k_shot: usize,
        original: Vec<ViewPair>,
        mixed: Option<Vec<ViewPair>>,
        tau: f64,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {tau}")));
        }
        if n_way == 0 || k_shot == 0 {
            return Err(Error::InvalidParameter("bank needs at least one class and shot".into()));
        }
        if mixed.is_none() && n_way < 2 {
            return Err(Error::InvalidParameter(
                "without mixed classes the contrastive loss needs at least two classes".into(),
            ));
        }
        let expected = n_way * k_shot;
        let dim = original.first().map_or(0, |v| v.central.len());
        for (name, pool) in [("original", Some(&original)), ("mixed", mixed.as_ref())] {
            let Some(pool) = pool else { continue };
            if pool.len() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "{name} pool has {} nodes, expected {expected}",
                    pool.len()
                )));
            }
            for v in pool {
                if v.central.len() != dim || v.pooled.len() != dim {
                    return Err(Error::DimensionMismatch(format!("{name} pool mixes view widths")));
                }
                if !v.central.iter().chain(&v.pooled).all(|x| x.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("{name} view embedding"),
                    });
                }
            }
        }
        Ok(ClassBank {
            n_way,
            k_shot,
            original,
            mixed,
            tau,
            self_correction: SelfCorrection::default(),
        })
    }

    pub fn with_self_correction(mut self, rule: SelfCorrection) -> Self {
        self.self_correction = rule;
        self
    }

    pub fn n_way(&self) -> usize {
        self.n_way
    }

    pub fn k_shot(&self) -> usize {
        self.k_shot
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn self_correction(&self) -> SelfCorrection {
        self.self_correction
    }

    pub fn has_mixed(&self) -> bool {
        self.mixed.is_some()
    }

    pub fn pools(&self) -> &'static [Pool] {
        if self.has_mixed() {
            &[Pool::Original, Pool::Mixed]
        } else {
            &[Pool::Original]
        }
    }

    pub fn node(&self, pool: Pool, i: usize, j: usize) -> &ViewPair {
        let list = match pool {
            Pool::Original => &self.original,
            Pool::Mixed => self.mixed.as_ref().expect("bank has no mixed pool"),
        };
        &list[i * self.k_shot + j]
    }

    fn pool_offset(&self, pool: Pool) -> usize {
        match pool {
            Pool::Original => 0,
            Pool::Mixed => self.n_way * self.k_shot,
        }
    }

    /// Row of `(pool, i, j, view t)` in the stacked embedding matrix.
    fn row(&self, pool: Pool, i: usize, j: usize, t: usize) -> usize {
        (self.pool_offset(pool) + i * self.k_shot + j) * NUM_VIEWS + t
    }

    fn stacked(&self) -> Array2<f64> {
        let rows = self.pools().len() * self.n_way * self.k_shot * NUM_VIEWS;
        let dim = self.original[0].central.len();
        let mut e = Array2::zeros((rows, dim));
        for &pool in self.pools() {
            for i in 0..self.n_way {
                for j in 0..self.k_shot {
                    for t in 0..NUM_VIEWS {
                        e.row_mut(self.row(pool, i, j, t)).assign(self.node(pool, i, j).view(t));
                    }
                }
            }
        }
        e
    }

    fn is_excluded_self_pair(&self, t: usize, r: usize) -> bool {
        t == r
            && match self.self_correction {
                SelfCorrection::SameView => true,
                SelfCorrection::CentralOnly => t == 0,
            }
    }

    /// `(anchor row, member row)` pairs that make up `MI(anchor, target class)`.
    fn mi_pairs(&self, anchor: (Pool, usize, usize), target: (Pool, usize)) -> Vec<(usize, usize)> {
        let (pool, i, j) = anchor;
        let own_class = target == (pool, i);
        let mut pairs = Vec::with_capacity(NUM_VIEWS * NUM_VIEWS * self.k_shot);
        for t in 0..NUM_VIEWS {
            for l in 0..self.k_shot {
                for r in 0..NUM_VIEWS {
                    if own_class && l == j && self.is_excluded_self_pair(t, r) {
                        continue;
                    }
                    pairs.push((self.row(pool, i, j, t), self.row(target.0, target.1, l, r)));
                }
            }
        }
        pairs
    }

    /// Classes in the denominator for an anchor of class `i` in `pool`.
    fn negatives(&self, pool: Pool, i: usize) -> Vec<(Pool, usize)> {
        let mut out = Vec::new();
        for &p in self.pools() {
            for k in 0..self.n_way {
                if !(p == pool && k == i) {
                    out.push((p, k));
                }
            }
        }
        out
    }
}

/// `MI(v_i^j, C_k)` evaluated directly, without stabilization.
pub fn mi_term(bank: &ClassBank, anchor: (Pool, usize, usize), target: (Pool, usize)) -> f64 {
    let a = bank.node(anchor.0, anchor.1, anchor.2);
    bank.mi_pairs(anchor, target)
        .into_iter()
        .map(|(ra, rb)| {
            let (t, r) = (ra % NUM_VIEWS, rb % NUM_VIEWS);
            let l = (rb / NUM_VIEWS - bank.pool_offset(target.0)) % bank.k_shot;
            let b = bank.node(target.0, target.1, l);
            (a.view(t).dot(b.view(r)) / bank.tau).exp()
        })
        .sum()
}

/// Scaled log-ratio for one anchor; optionally accumulates `dloss/d(similarity)` weights.
fn anchor_loss(
    bank: &ClassBank,
    gram: &Array2<f64>,
    anchor: (Pool, usize, usize),
    scale: f64,
    weights: Option<&mut Array2<f64>>,
) -> f64 {
    let (pool, i, _) = anchor;
    let positive = bank.mi_pairs(anchor, (pool, i));
    let negative: Vec<(usize, usize)> = bank
        .negatives(pool, i)
        .into_iter()
        .flat_map(|target| bank.mi_pairs(anchor, target))
        .collect();
    debug_assert!(!positive.is_empty() && !negative.is_empty());

    let sim = |&(a, b): &(usize, usize)| gram[[a, b]] / bank.tau;
    let peak = positive.iter().chain(&negative).map(sim).fold(f64::NEG_INFINITY, f64::max);
    let pos_exp: Vec<f64> = positive.iter().map(|p| (sim(p) - peak).exp()).collect();
    let neg_exp: Vec<f64> = negative.iter().map(|p| (sim(p) - peak).exp()).collect();
    let num: f64 = pos_exp.iter().sum();
    let den: f64 = neg_exp.iter().sum();

    if let Some(w) = weights {
        for (&(a, b), e) in positive.iter().zip(&pos_exp) {
            w[[a, b]] -= scale * e / num;
        }
        for (&(a, b), e) in negative.iter().zip(&neg_exp) {
            w[[a, b]] += scale * e / den;
        }
    }
    scale * (den.ln() - num.ln())
}

/// Loss of a single anchor, `-ln(MI(a, own) / sum MI(a, others))`.
pub fn node_loss(bank: &ClassBank, pool: Pool, i: usize, j: usize) -> f64 {
    let e = bank.stacked();
    let gram = e.dot(&e.t());
    anchor_loss(bank, &gram, (pool, i, j), 1.0, None)
}

/// Loss value and its gradient w.r.t. every view in the bank.
#[derive(Clone, Debug)]
pub struct LmcOutput {
    pub loss: f64,
    pub grad_original: Vec<ViewPair>,
    pub grad_mixed: Option<Vec<ViewPair>>,
}

/// Episode loss: the mean anchor loss over original anchors, plus the mean
/// over mixed anchors when the bank has a mixed pool.
pub fn l_mc(bank: &ClassBank) -> LmcOutput {
    let e = bank.stacked();
    let gram = e.dot(&e.t());
    let mut weights = Array2::zeros(gram.raw_dim());
    let scale = 1.0 / (bank.n_way * bank.k_shot) as f64;
    let mut loss = 0.0;
    for &pool in bank.pools() {
        for i in 0..bank.n_way {
            for j in 0..bank.k_shot {
                loss += anchor_loss(bank, &gram, (pool, i, j), scale, Some(&mut weights));
            }
        }
    }
    // s_ab = e_a . e_b / tau  =>  dL/dE = (W + W^T) E / tau
    let sym = &weights + &weights.t();
    let grad_e = sym.dot(&e) / bank.tau;
    let unstack = |pool: Pool| -> Vec<ViewPair> {
        let mut out = Vec::with_capacity(bank.n_way * bank.k_shot);
        for i in 0..bank.n_way {
            for j in 0..bank.k_shot {
                let row = |t| -> Array1<f64> { grad_e.row(bank.row(pool, i, j, t)).to_owned() };
                out.push(ViewPair {
                    central: row(0),
                    pooled: row(1),
                });
            }
        }
        out
    };
    LmcOutput {
        loss,
        grad_original: unstack(Pool::Original),
        grad_mixed: bank.has_mixed().then(|| unstack(Pool::Mixed)),
    }
}
