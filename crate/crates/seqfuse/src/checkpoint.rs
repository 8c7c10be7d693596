//! Model checkpoints.
//!
//! A checkpoint is one JSON header line terminated by `\n`, followed by every
//! parameter as a little-endian f32, block by block in [`BLOCK_NAMES`] order,
//! each block row-major. The header records the dimensions and block shapes
//! so a reader can check the blob length before touching the parameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use seqfuse_core::diff::Shape;
use seqfuse_core::model::{FusionModel, GruInput, BLOCK_NAMES};
use seqfuse_core::train::TrainConfig;

use crate::error::{Error, Result};

pub const FORMAT: &str = "seqfuse-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockInfo {
    pub name: String,
    /// `[rows, cols]` for matrices, `[len]` for vectors.
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub gru_input: GruInput,
    pub seed: u64,
    pub blocks: Vec<BlockInfo>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

impl CheckpointHeader {
    pub fn for_model(model: &FusionModel, seed: u64, train: Option<TrainConfig>) -> Self {
        let blocks = model
            .blocks()
            .iter()
            .zip(BLOCK_NAMES)
            .map(|(b, name)| BlockInfo {
                name: name.to_string(),
                shape: dims(b.shape()),
            })
            .collect();
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            input_dim: model.input_dim(),
            embed_dim: model.hidden(),
            hidden: model.hidden(),
            gru_input: model.gru_input,
            seed,
            blocks,
            train,
        }
    }

    fn param_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.shape.iter().product::<usize>())
            .sum()
    }
}

fn dims(shape: Shape) -> Vec<usize> {
    match shape {
        Shape::Scalar => vec![],
        Shape::Vector(n) => vec![n],
        Shape::Matrix(r, c) => vec![r, c],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: FusionModel,
}

/// Serialises `model` to bytes; parameters are rounded to f32.
pub fn encode_checkpoint(model: &FusionModel, seed: u64, train: Option<TrainConfig>) -> Vec<u8> {
    let header = CheckpointHeader::for_model(model, seed, train);
    let mut out = serde_json::to_vec(&header).expect("checkpoint header serialises");
    out.push(b'\n');
    out.reserve(model.param_count() * 4);
    for v in model.flatten() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn save_checkpoint(
    path: &Path,
    model: &FusionModel,
    seed: u64,
    train: Option<TrainConfig>,
) -> Result<()> {
    fs::write(path, encode_checkpoint(model, seed, train)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|detail| Error::format(path, detail))
}

/// Parses checkpoint bytes. Nothing is built unless every check passes.
pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("corrupt header: no header line")?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| format!("corrupt header: {e}"))?;
    if header.format != FORMAT {
        return Err(format!("not a checkpoint (format {:?})", header.format));
    }
    if header.version != VERSION {
        return Err(format!(
            "unsupported checkpoint version {} (expected {VERSION})",
            header.version
        ));
    }
    if header.embed_dim != header.hidden {
        return Err(format!(
            "embed_dim {} differs from hidden {}",
            header.embed_dim, header.hidden
        ));
    }
    let mut model = FusionModel::zeros(header.input_dim, header.hidden);
    model.gru_input = header.gru_input;
    let expected: Vec<BlockInfo> = CheckpointHeader::for_model(&model, header.seed, None).blocks;
    if header.blocks != expected {
        return Err(format!(
            "dimension mismatch: block layout does not match input_dim {} and hidden {}",
            header.input_dim, header.hidden
        ));
    }
    let blob = &bytes[newline + 1..];
    let want = header.param_count() * 4;
    if blob.len() < want {
        return Err(format!(
            "truncated blob: expected {want} bytes, found {}",
            blob.len()
        ));
    }
    if blob.len() > want {
        return Err(format!(
            "trailing data: expected {want} bytes, found {}",
            blob.len()
        ));
    }
    let flat: Vec<f64> = blob
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err("blob holds a non-finite parameter".into());
    }
    model.load_flat(&flat).map_err(|e| e.to_string())?;
    Ok(Checkpoint { header, model })
}
