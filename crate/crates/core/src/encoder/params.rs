use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::InvalidParameter(format!("unknown precision {other:?} (f32 or f64)"))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Encoder weights plus the N-way classification head used during meta-training.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// GCN weight, `feature_dim x hidden_dim`.
    pub weight: Array2<f64>,
    /// Head weight, `hidden_dim x n_way`.
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
    generation: u64,
}

impl ModelParams {
    pub fn new(weight: Array2<f64>, head_weight: Array2<f64>, head_bias: Array1<f64>) -> Result<Self> {
        if head_weight.nrows() != weight.ncols() || head_bias.len() != head_weight.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "encoder {:?}, head {:?}, bias {}",
                weight.dim(),
                head_weight.dim(),
                head_bias.len()
            )));
        }
        Ok(ModelParams {
            weight,
            head_weight,
            head_bias,
            generation: 0,
        })
    }

    /// Glorot-uniform encoder weight and a zero head.
    pub fn init<R: Rng + ?Sized>(feature_dim: usize, hidden_dim: usize, n_way: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (feature_dim + hidden_dim) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((feature_dim, hidden_dim), || rng.random_range(-limit..limit));
        ModelParams {
            weight,
            head_weight: Array2::zeros((hidden_dim, n_way)),
            head_bias: Array1::zeros(n_way),
            generation: 0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_way(&self) -> usize {
        self.head_bias.len()
    }

    /// Incremented by every parameter update; forward caches record it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn bump_generation(&mut self) {
        self.generation += 1;
    }

    pub fn reset_head(&mut self, n_way: usize) {
        self.head_weight = Array2::zeros((self.hidden_dim(), n_way));
        self.head_bias = Array1::zeros(n_way);
        self.bump_generation();
    }

    /// Rounds every parameter to the nearest `f32` under [`Precision::F32`].
    pub fn quantize(&mut self, precision: Precision) {
        if precision == Precision::F32 {
            let round = |x: &mut f64| *x = *x as f32 as f64;
            self.weight.iter_mut().for_each(round);
            self.head_weight.iter_mut().for_each(round);
            self.head_bias.iter_mut().for_each(round);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.head_weight).chain(&self.head_bias).all(|x| x.is_finite())
    }

    /// Little-endian byte image of all parameters.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.weight
            .iter()
            .chain(&self.head_weight)
            .chain(&self.head_bias)
            .flat_map(|x| x.to_le_bytes())
            .collect()
    }

    /// `self - step * grad` on the encoder weight only, as a new value.
    pub fn sgd_encoder(&self, grad_weight: &Array2<f64>, step: f64) -> Self {
        let mut next = self.clone();
        Zip::from(&mut next.weight).and(grad_weight).for_each(|w, &g| *w -= step * g);
        next.bump_generation();
        next
    }
}

/// Gradient with the same layout as [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub weight: Array2<f64>,
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrads {
            weight: Array2::zeros(params.weight.raw_dim()),
            head_weight: Array2::zeros(params.head_weight.raw_dim()),
            head_bias: Array1::zeros(params.head_bias.raw_dim()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.weight
            .iter()
            .chain(&self.head_weight)
            .chain(&self.head_bias)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.head_weight).chain(&self.head_bias).all(|x| x.is_finite())
    }
}
