//! Binary checkpoint: magic, version, JSON header, then shape-prefixed
//! row-major tensors (encoder weight, head weight, head bias), little endian.
//!
//! ```text
//! b"CSMCKPT\0" | u32 version | u32 header_len | header JSON
//! u32 tensor_count | per tensor: u32 ndim, u64 dims.., data (f32 or f64)
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ModelParams, Precision};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"CSMCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub dtype: Precision,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub n_way: usize,
    pub seed: u64,
    pub episode: usize,
    /// Free-form training context (graph source, subgraph size, ...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl CheckpointHeader {
    pub fn new(params: &ModelParams, dtype: Precision, seed: u64, episode: usize, meta: serde_json::Value) -> Self {
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            dtype,
            feature_dim: params.feature_dim(),
            hidden_dim: params.hidden_dim(),
            n_way: params.n_way(),
            seed,
            episode,
            meta,
        }
    }
}

fn push_tensor(out: &mut Vec<u8>, dims: &[usize], data: impl Iterator<Item = f64>, dtype: Precision) {
    out.extend((dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend((d as u64).to_le_bytes());
    }
    for x in data {
        match dtype {
            Precision::F64 => out.extend(x.to_le_bytes()),
            Precision::F32 => out.extend((x as f32).to_le_bytes()),
        }
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams, header: &CheckpointHeader) -> Result<()> {
    let path = path.as_ref();
    if header.feature_dim != params.feature_dim()
        || header.hidden_dim != params.hidden_dim()
        || header.n_way != params.n_way()
    {
        return Err(Error::Checkpoint("header dimensions disagree with parameters".into()));
    }
    let json = serde_json::to_vec(header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(json.len() + 8 * (params.weight.len() + params.head_weight.len()) + 64);
    out.extend(MAGIC);
    out.extend(CHECKPOINT_VERSION.to_le_bytes());
    out.extend((json.len() as u32).to_le_bytes());
    out.extend(&json);
    out.extend(3u32.to_le_bytes());
    push_tensor(&mut out, params.weight.shape(), params.weight.iter().copied(), header.dtype);
    push_tensor(&mut out, params.head_weight.shape(), params.head_weight.iter().copied(), header.dtype);
    push_tensor(&mut out, params.head_bias.shape(), params.head_bias.iter().copied(), header.dtype);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self, dtype: Precision) -> Result<(Vec<usize>, Vec<f64>)> {
        let ndim = self.u32()? as usize;
        if ndim > 4 {
            return Err(Error::Checkpoint(format!("tensor rank {ndim} unsupported")));
        }
        let dims = (0..ndim).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        let width = match dtype {
            Precision::F64 => 8,
            Precision::F32 => 4,
        };
        let raw = self.take(count.checked_mul(width).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        let data = match dtype {
            Precision::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect(),
            Precision::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64)
                .collect(),
        };
        Ok((dims, data))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ModelParams)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = r.u32()? as usize;
    let header: CheckpointHeader =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if r.u32()? != 3 {
        return Err(Error::Checkpoint("expected 3 tensors".into()));
    }
    let mat = |(dims, data): (Vec<usize>, Vec<f64>)| -> Result<Array2<f64>> {
        match dims.as_slice() {
            &[rows, cols] => Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string())),
            other => Err(Error::Checkpoint(format!("expected a matrix, got shape {other:?}"))),
        }
    };
    let weight = mat(r.tensor(header.dtype)?)?;
    let head_weight = mat(r.tensor(header.dtype)?)?;
    let (dims, data) = r.tensor(header.dtype)?;
    if dims.len() != 1 {
        return Err(Error::Checkpoint(format!("expected a vector bias, got shape {dims:?}")));
    }
    let params = ModelParams::new(weight, head_weight, Array1::from(data))?;
    if header.feature_dim != params.feature_dim() || header.hidden_dim != params.hidden_dim() || header.n_way != params.n_way() {
        return Err(Error::Checkpoint("header dimensions disagree with stored tensors".into()));
    }
    Ok((header, params))
}
