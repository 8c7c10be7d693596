use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::math::{compensated_sum, euclidean, softplus};

/// Per-index triplet term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TripletKind {
    #[default]
    SoftMargin,
    Hinge {
        margin: f64,
    },
}

impl TripletKind {
    pub const DEFAULT_MARGIN: f64 = 0.3;

    fn apply(self, d_p: f64, d_n: f64) -> f64 {
        match self {
            TripletKind::SoftMargin => softplus(d_p - d_n),
            TripletKind::Hinge { margin } => (d_p - d_n + margin).max(0.0),
        }
    }
}

/// `ln(1 + exp(‖f−p‖ − ‖f−n‖))`.
pub fn soft_triplet(f: &[f64], p: &[f64], n: &[f64]) -> f64 {
    softplus(euclidean(f, p) - euclidean(f, n))
}

/// `max(0, ‖f−p‖ − ‖f−n‖ + m)`.
pub fn hinge_triplet(f: &[f64], p: &[f64], n: &[f64], margin: f64) -> f64 {
    (euclidean(f, p) - euclidean(f, n) + margin).max(0.0)
}

/// Monotonicity hinge at 1-based index `t`. Zero at `t = 1`.
pub fn monotonicity_loss<F: AsRef<[f64]>, N: AsRef<[f64]>>(
    fused: &[F],
    positive: &[f64],
    negatives: &[N],
    t: usize,
) -> Result<f64> {
    if t == 0 || t > fused.len() || t > negatives.len() {
        return Err(Error::arg(
            "monotonicity_loss",
            format!(
                "t = {t} with {} fused and {} negatives",
                fused.len(),
                negatives.len()
            ),
        ));
    }
    let d_p = |i: usize| euclidean(fused[i].as_ref(), positive);
    let d_n = |i: usize| euclidean(fused[i].as_ref(), negatives[i].as_ref());
    Ok(monotonicity_from(
        &(0..t).map(d_p).collect::<Vec<_>>(),
        &(0..t).map(d_n).collect::<Vec<_>>(),
    ))
}

fn monotonicity_from(d_p: &[f64], d_n: &[f64]) -> f64 {
    let t = d_p.len();
    if t < 2 {
        return 0.0;
    }
    let best_p = d_p[..t - 1].iter().copied().fold(f64::INFINITY, f64::min);
    let best_n = d_n[..t - 1]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (d_p[t - 1] - best_p).max(0.0) + (best_n - d_n[t - 1]).max(0.0)
}

/// `t / (T(T+1)/2)`.
pub fn lambda_r(t: usize, len: usize) -> Result<f64> {
    if t == 0 || t > len {
        return Err(Error::arg("lambda_r", format!("t = {t} outside 1..={len}")));
    }
    Ok(t as f64 / (len * (len + 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub recency: Vec<f64>,
}

impl LossWeights {
    /// Weights for a sequence of length `len`; `recency` is all zero when
    /// the monotonicity term is switched off.
    pub fn new(lambda: f64, len: usize, monotonicity: bool) -> Result<Self> {
        let recency = (1..=len)
            .map(|t| {
                if monotonicity {
                    lambda_r(t, len)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lambda, recency })
    }

    pub fn recency_sum(&self) -> f64 {
        compensated_sum(self.recency.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Unweighted mean of the per-index triplet terms.
    pub triplet: f64,
    /// Unweighted mean of the per-index monotonicity terms.
    pub monotonicity: f64,
}

impl LossParts {
    pub(crate) fn add(&mut self, other: &LossParts) {
        self.total += other.total;
        self.triplet += other.triplet;
        self.monotonicity += other.monotonicity;
    }

    pub(crate) fn scaled(self, k: f64) -> Self {
        Self {
            total: self.total * k,
            triplet: self.triplet * k,
            monotonicity: self.monotonicity * k,
        }
    }
}

/// `(1/T) Σ_t [λ·triplet_t + λ^R_t·monotonicity_t]` over a fused trace.
pub fn total_loss<F: AsRef<[f64]>, N: AsRef<[f64]>>(
    fused: &[F],
    positive: &[f64],
    negatives: &[N],
    weights: &LossWeights,
    kind: TripletKind,
) -> Result<LossParts> {
    let len = fused.len();
    if len == 0 || negatives.len() != len || weights.recency.len() != len {
        return Err(Error::dim(
            "total_loss",
            format!(
                "{len} fused, {} negatives, {} weights",
                negatives.len(),
                weights.recency.len()
            ),
        ));
    }
    let d_p: Vec<f64> = fused
        .iter()
        .map(|f| euclidean(f.as_ref(), positive))
        .collect();
    let d_n: Vec<f64> = fused
        .iter()
        .zip(negatives)
        .map(|(f, n)| euclidean(f.as_ref(), n.as_ref()))
        .collect();
    let mut parts = LossParts::default();
    for t in 0..len {
        let tri = kind.apply(d_p[t], d_n[t]);
        let mon = monotonicity_from(&d_p[..=t], &d_n[..=t]);
        parts.total += weights.lambda * tri + weights.recency[t] * mon;
        parts.triplet += tri;
        parts.monotonicity += mon;
    }
    Ok(parts.scaled(1.0 / len as f64))
}

/// Graph form of [`total_loss`]. Returns the scalar node and the value parts.
/// The min/max inside the monotonicity term route gradient to the selected index.
pub fn graph_sequence_loss(
    g: &mut Graph<f64>,
    fused: &[NodeId],
    positive: NodeId,
    negatives: &[NodeId],
    weights: &LossWeights,
    kind: TripletKind,
) -> Result<(NodeId, LossParts)> {
    let len = fused.len();
    if len == 0 || negatives.len() != len || weights.recency.len() != len {
        return Err(Error::dim(
            "graph_sequence_loss",
            format!(
                "{len} fused, {} negatives, {} weights",
                negatives.len(),
                weights.recency.len()
            ),
        ));
    }
    let mut d_p = Vec::with_capacity(len);
    let mut d_n = Vec::with_capacity(len);
    for t in 0..len {
        d_p.push(g.euclidean(fused[t], positive)?);
        d_n.push(g.euclidean(fused[t], negatives[t])?);
    }
    let mut terms = Vec::with_capacity(2 * len);
    let mut parts = LossParts::default();
    for t in 0..len {
        let diff = g.sub(d_p[t], d_n[t])?;
        let tri = match kind {
            TripletKind::SoftMargin => g.softplus(diff)?,
            TripletKind::Hinge { margin } => {
                let m = g.constant(Tensor::scalar(margin))?;
                let shifted = g.add(diff, m)?;
                g.relu(shifted)?
            }
        };
        parts.triplet += g.item(tri);
        terms.push(g.scale(tri, weights.lambda)?);
        if t >= 1 {
            let best_p = g.min(&d_p[..t])?;
            let best_n = g.max(&d_n[..t])?;
            let up = g.sub(d_p[t], best_p)?;
            let up = g.relu(up)?;
            let down = g.sub(best_n, d_n[t])?;
            let down = g.relu(down)?;
            let mon = g.add(up, down)?;
            parts.monotonicity += g.item(mon);
            if weights.recency[t] != 0.0 {
                terms.push(g.scale(mon, weights.recency[t])?);
            }
        }
    }
    let summed = g.sum(&terms)?;
    let root = g.scale(summed, 1.0 / len as f64)?;
    parts.total = g.item(root);
    parts.triplet /= len as f64;
    parts.monotonicity /= len as f64;
    Ok((root, parts))
}
