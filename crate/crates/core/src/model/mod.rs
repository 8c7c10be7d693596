//! The fusion function: linear embedding → running mean-pool → GRU.
//!
//! Two evaluation paths share one parameter set. [`FusionModel::fuse_sequence`]
//! is plain `f64` arithmetic used for inference and ranking;
//! [`GraphModel`] records the same computation on a [`Graph`] for training.
//! Tests keep the two in agreement.

mod pool;

pub use pool::{pool_fuse, PoolKind};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Graph, NodeId, Shape, Tensor};
use crate::error::{Error, Result};
use crate::math::sigmoid;

/// What the GRU consumes at index `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GruInput {
    /// Running mean of the embedded features `x̃_1..x̃_t`.
    #[default]
    Pooled,
    /// The embedded feature `x̃_t` alone.
    Raw,
}

/// Parameter blocks in checkpoint order.
pub const BLOCK_NAMES: [&str; 11] = [
    "fc_weight",
    "fc_bias",
    "w_rx",
    "w_rh",
    "b_r",
    "w_zx",
    "w_zh",
    "b_z",
    "w_hx",
    "w_hh",
    "b_h",
];

/// Reset gate, update gate and candidate state, each with an input matrix
/// (`H × D_in`), a recurrent matrix (`H × H`) and a bias (`H`). Shared by all
/// sequence indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_rx: Tensor<f64>,
    pub w_rh: Tensor<f64>,
    pub b_r: Tensor<f64>,
    pub w_zx: Tensor<f64>,
    pub w_zh: Tensor<f64>,
    pub b_z: Tensor<f64>,
    pub w_hx: Tensor<f64>,
    pub w_hh: Tensor<f64>,
    pub b_h: Tensor<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wx = || Tensor::zeros(Shape::Matrix(hidden, input));
        let wh = || Tensor::zeros(Shape::Matrix(hidden, hidden));
        let b = || Tensor::zeros(Shape::Vector(hidden));
        Self {
            w_rx: wx(),
            w_rh: wh(),
            b_r: b(),
            w_zx: wx(),
            w_zh: wh(),
            b_z: b(),
            w_hx: wx(),
            w_hh: wh(),
            b_h: b(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_r.len()
    }

    pub fn input(&self) -> usize {
        match self.w_rx.shape() {
            Shape::Matrix(_, c) => c,
            _ => 0,
        }
    }

    fn blocks(&self) -> [&Tensor<f64>; 9] {
        [
            &self.w_rx, &self.w_rh, &self.b_r, &self.w_zx, &self.w_zh, &self.b_z, &self.w_hx,
            &self.w_hh, &self.b_h,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Tensor<f64>; 9] {
        [
            &mut self.w_rx,
            &mut self.w_rh,
            &mut self.b_r,
            &mut self.w_zx,
            &mut self.w_zh,
            &mut self.b_z,
            &mut self.w_hx,
            &mut self.w_hh,
            &mut self.b_h,
        ]
    }

    fn check(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input());
        let expected = [
            Shape::Matrix(h, i),
            Shape::Matrix(h, h),
            Shape::Vector(h),
            Shape::Matrix(h, i),
            Shape::Matrix(h, h),
            Shape::Vector(h),
            Shape::Matrix(h, i),
            Shape::Matrix(h, h),
            Shape::Vector(h),
        ];
        for ((block, want), name) in self.blocks().iter().zip(expected).zip(&BLOCK_NAMES[2..]) {
            if block.shape() != want {
                return Err(Error::dim(
                    "gru",
                    format!("{name} has shape {:?}, expected {want:?}", block.shape()),
                ));
            }
        }
        Ok(())
    }
}

/// Gate activations of one GRU step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruGates {
    pub reset: Vec<f64>,
    pub update: Vec<f64>,
    pub candidate: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// `r = σ(W_rx·in + W_rh·h + b_r)`, `z = σ(W_zx·in + W_zh·h + b_z)`,
/// `s = tanh(W_hx·in + W_hh·(h ⊙ r) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ s`.
pub fn gru_step(params: &GruParams, input: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    gru_gates(params, input, h_prev).map(|g| g.hidden)
}

pub fn gru_gates(params: &GruParams, input: &[f64], h_prev: &[f64]) -> Result<GruGates> {
    let h = params.hidden();
    if h_prev.len() != h {
        return Err(Error::dim(
            "gru_step",
            format!("hidden state has length {}, expected {h}", h_prev.len()),
        ));
    }
    let affine =
        |wx: &Tensor<f64>, wh: &Tensor<f64>, b: &Tensor<f64>, hv: &[f64]| -> Result<Vec<f64>> {
            let a = wx.matvec(input)?;
            let c = wh.matvec(hv)?;
            Ok(a.iter()
                .zip(&c)
                .zip(b.as_slice())
                .map(|((x, y), z)| x + y + z)
                .collect())
        };
    let reset: Vec<f64> = affine(&params.w_rx, &params.w_rh, &params.b_r, h_prev)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let update: Vec<f64> = affine(&params.w_zx, &params.w_zh, &params.b_z, h_prev)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let gated: Vec<f64> = h_prev.iter().zip(&reset).map(|(a, b)| a * b).collect();
    let candidate: Vec<f64> = affine(&params.w_hx, &params.w_hh, &params.b_h, &gated)?
        .into_iter()
        .map(Float::tanh)
        .collect();
    let hidden = (0..h)
        .map(|k| (1.0 - update[k]) * h_prev[k] + update[k] * candidate[k])
        .collect();
    Ok(GruGates {
        reset,
        update,
        candidate,
        hidden,
    })
}

/// Per-index outputs of one fused sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTrace {
    /// `f_t = h_t` for `t = 1..=k`.
    pub fused: Vec<Vec<f64>>,
    /// What the GRU consumed at each index.
    pub inputs: Vec<Vec<f64>>,
}

impl FusedTrace {
    pub fn len(&self) -> usize {
        self.fused.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fused.is_empty()
    }

    /// The final hidden state `h_k`.
    pub fn last(&self) -> &[f64] {
        self.fused.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub fc_weight: Tensor<f64>,
    pub fc_bias: Tensor<f64>,
    pub gru: GruParams,
    pub gru_input: GruInput,
}

impl FusionModel {
    /// All-zero model with embedding and hidden size `hidden`.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            fc_weight: Tensor::zeros(Shape::Matrix(hidden, input_dim)),
            fc_bias: Tensor::zeros(Shape::Vector(hidden)),
            gru: GruParams::zeros(hidden, hidden),
            gru_input: GruInput::Pooled,
        }
    }

    /// Xavier-uniform weights in `(−a, a)`, `a = √(6 / (fan_in + fan_out))`,
    /// zero biases. Deterministic in `seed`.
    pub fn init(seed: u64, input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "model dims must be positive (input {input_dim}, hidden {hidden})"
            )));
        }
        let mut model = Self::zeros(input_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in model.blocks_mut() {
            if let Shape::Matrix(rows, cols) = block.shape() {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                for v in block.as_mut_slice() {
                    *v = loop {
                        let x = rng.random_range(-a..a);
                        if x != -a {
                            break x;
                        }
                    };
                }
            }
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        match self.fc_weight.shape() {
            Shape::Matrix(_, c) => c,
            _ => 0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.fc_bias.len()
    }

    /// Parameter blocks in [`BLOCK_NAMES`] order.
    pub fn blocks(&self) -> [&Tensor<f64>; 11] {
        let g = self.gru.blocks();
        [
            &self.fc_weight,
            &self.fc_bias,
            g[0],
            g[1],
            g[2],
            g[3],
            g[4],
            g[5],
            g[6],
            g[7],
            g[8],
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Tensor<f64>; 11] {
        let [a, b, c, d, e, f, g, h, i] = self.gru.blocks_mut();
        [
            &mut self.fc_weight,
            &mut self.fc_bias,
            a,
            b,
            c,
            d,
            e,
            f,
            g,
            h,
            i,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// All parameters concatenated in block order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in self.blocks() {
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    /// Overwrites all parameters from a block-ordered flat slice.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim(
                "load_flat",
                format!(
                    "model has {} parameters, got {}",
                    self.param_count(),
                    flat.len()
                ),
            ));
        }
        let mut offset = 0;
        for b in self.blocks_mut() {
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden(), self.input_dim());
        if self.fc_weight.shape() != Shape::Matrix(h, d) {
            return Err(Error::dim(
                "model",
                format!("fc_weight has shape {:?}", self.fc_weight.shape()),
            ));
        }
        if self.gru.hidden() != h || self.gru.input() != h {
            return Err(Error::dim(
                "model",
                format!(
                    "GRU is {}×{}, embedding is {h}",
                    self.gru.hidden(),
                    self.gru.input()
                ),
            ));
        }
        self.gru.check()
    }

    /// `x̃ = W_fc·x + b_fc` (no activation).
    pub fn fc_embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.fc_weight.matvec(x)?;
        for (o, b) in out.iter_mut().zip(self.fc_bias.as_slice()) {
            *o += b;
        }
        Ok(out)
    }

    /// Runs the fusion function over `sequence`, starting from `h_0 = 0`.
    pub fn fuse_sequence<S: AsRef<[f64]>>(&self, sequence: &[S]) -> Result<FusedTrace> {
        if sequence.is_empty() {
            return Err(Error::arg("fuse_sequence", "empty sequence"));
        }
        let hsize = self.hidden();
        let mut running = vec![0.0; hsize];
        let mut h = vec![0.0; hsize];
        let mut trace = FusedTrace {
            fused: Vec::with_capacity(sequence.len()),
            inputs: Vec::new(),
        };
        for (t, x) in sequence.iter().enumerate() {
            let embedded = self.fc_embed(x.as_ref())?;
            let input = match self.gru_input {
                GruInput::Raw => embedded,
                GruInput::Pooled => {
                    for (acc, v) in running.iter_mut().zip(&embedded) {
                        *acc += v;
                    }
                    let n = (t + 1) as f64;
                    running.iter().map(|v| v / n).collect()
                }
            };
            h = gru_step(&self.gru, &input, &h)?;
            trace.fused.push(h.clone());
            trace.inputs.push(input);
        }
        Ok(trace)
    }

    /// Fused feature of a single record (`k = 1`).
    pub fn single_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let embedded = self.fc_embed(x)?;
        gru_step(&self.gru, &embedded, &vec![0.0; self.hidden()])
    }

    /// `f_k` of the sequence `[g; k]`, used to compare gallery records against
    /// a length-`k` fused query.
    pub fn repeated(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let seq = vec![x; k.max(1)];
        Ok(self.fuse_sequence(&seq)?.fused.pop().expect("non-empty"))
    }
}

/// Parameters of a [`FusionModel`] registered as leaves of a [`Graph`].
#[derive(Debug, Clone)]
pub struct GraphModel {
    nodes: [NodeId; 11],
    hidden: usize,
    gru_input: GruInput,
    zero_state: NodeId,
}

impl GraphModel {
    pub fn register(g: &mut Graph<f64>, model: &FusionModel) -> Result<Self> {
        let mut ids = Vec::with_capacity(11);
        for block in model.blocks() {
            ids.push(g.param(block.clone())?);
        }
        let nodes: [NodeId; 11] = ids.try_into().expect("eleven parameter blocks");
        let zero_state = g.constant(Tensor::zeros(Shape::Vector(model.hidden())))?;
        Ok(Self {
            nodes,
            hidden: model.hidden(),
            gru_input: model.gru_input,
            zero_state,
        })
    }

    /// Leaf ids in block order.
    pub fn params(&self) -> &[NodeId; 11] {
        &self.nodes
    }

    /// Block-ordered flat gradient, matching [`FusionModel::flatten`].
    pub fn flat_grad(&self, g: &Graph<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        for &n in &self.nodes {
            out.extend_from_slice(g.grad(n));
        }
        out
    }

    pub fn fc_embed(&self, g: &mut Graph<f64>, x: NodeId) -> Result<NodeId> {
        let wx = g.matvec(self.nodes[0], x)?;
        g.add(wx, self.nodes[1])
    }

    pub fn gru_step(&self, g: &mut Graph<f64>, input: NodeId, h_prev: NodeId) -> Result<NodeId> {
        let n = &self.nodes;
        let gate =
            |g: &mut Graph<f64>, wx: NodeId, wh: NodeId, b: NodeId, hv: NodeId| -> Result<NodeId> {
                let a = g.matvec(wx, input)?;
                let c = g.matvec(wh, hv)?;
                let s = g.add(a, c)?;
                g.add(s, b)
            };
        let pre_r = gate(g, n[2], n[3], n[4], h_prev)?;
        let r = g.sigmoid(pre_r)?;
        let pre_z = gate(g, n[5], n[6], n[7], h_prev)?;
        let z = g.sigmoid(pre_z)?;
        let gated = g.mul(h_prev, r)?;
        let pre_s = gate(g, n[8], n[9], n[10], gated)?;
        let s = g.tanh(pre_s)?;
        let ones = g.constant(Tensor::vector(vec![1.0; self.hidden]))?;
        let keep = g.sub(ones, z)?;
        let old = g.mul(keep, h_prev)?;
        let new = g.mul(z, s)?;
        g.add(old, new)
    }

    /// Fused nodes `f_1..f_k` for a sequence of raw features.
    pub fn fuse_sequence<S: AsRef<[f64]>>(
        &self,
        g: &mut Graph<f64>,
        sequence: &[S],
    ) -> Result<Vec<NodeId>> {
        if sequence.is_empty() {
            return Err(Error::arg("fuse_sequence", "empty sequence"));
        }
        let mut embedded = Vec::with_capacity(sequence.len());
        let mut fused = Vec::with_capacity(sequence.len());
        let mut h = self.zero_state;
        for x in sequence {
            let leaf = g.constant(Tensor::vector(x.as_ref().to_vec()))?;
            embedded.push(self.fc_embed(g, leaf)?);
            let input = match self.gru_input {
                GruInput::Raw => *embedded.last().expect("pushed"),
                GruInput::Pooled => g.mean_pool(&embedded)?,
            };
            h = self.gru_step(g, input, h)?;
            fused.push(h);
        }
        Ok(fused)
    }

    /// Single-step feature of one raw record, sharing the sequence code path.
    pub fn single_step(&self, g: &mut Graph<f64>, x: &[f64]) -> Result<NodeId> {
        Ok(self.fuse_sequence(g, &[x])?[0])
    }
}

/// [`FusionModel::init`] with an explicit GRU input mode.
pub fn init_params(
    seed: u64,
    input_dim: usize,
    hidden: usize,
    gru_input: GruInput,
) -> Result<FusionModel> {
    let mut m = FusionModel::init(seed, input_dim, hidden)?;
    m.gru_input = gru_input;
    Ok(m)
}
