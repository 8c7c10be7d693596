use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, build_batch, graph_sequence_loss, lambda_schedule, mine_negative, total_loss,
    AdamConfig, AdamState, Batch, CameraOrder, LossParts, LossWeights, PositiveSource, Schedule,
    TripletKind,
};
use crate::data::{Dataset, PersonId, Split};
use crate::diff::Graph;
use crate::error::{Error, Result};
use crate::model::{init_params, FusionModel, GraphModel, GruInput};

/// Offset between the initialisation stream and the batch stream.
const BATCH_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: Schedule,
    pub lambda0: f64,
    pub adam: AdamConfig,
    /// Identities per batch.
    pub batch_identities: usize,
    pub iterations: u64,
    pub seed: u64,
    pub hidden: usize,
    pub gru_input: GruInput,
    pub triplet: TripletKind,
    pub monotonicity: bool,
    pub positive: PositiveSource,
    pub camera_order: CameraOrder,
    /// Checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: Schedule {
                initial: 1e-4,
                t0: 15_000,
                t1: 25_000,
            },
            lambda0: 0.01,
            adam: AdamConfig::default(),
            batch_identities: 8,
            iterations: 25_000,
            seed: 0,
            hidden: 512,
            gru_input: GruInput::Pooled,
            triplet: TripletKind::SoftMargin,
            monotonicity: true,
            positive: PositiveSource::OwnSequence,
            camera_order: CameraOrder::Ascending,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Small-scale settings for the default synthetic set: 5k iterations,
    /// H = 64, a triplet weight on par with the monotonicity term and
    /// shuffled camera order.
    pub fn desk() -> Self {
        Self {
            learning_rate: Schedule {
                initial: 5e-4,
                t0: 3_000,
                t1: 5_000,
            },
            lambda0: 1.0,
            iterations: 5_000,
            hidden: 64,
            camera_order: CameraOrder::Shuffled,
            ..Self::default()
        }
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let lr = &self.learning_rate;
        if !(lr.initial > 0.0 && lr.initial.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                lr.initial
            )));
        }
        if lr.t0 >= lr.t1 {
            return Err(Error::Config(format!(
                "schedule needs t0 < t1, got {} and {}",
                lr.t0, lr.t1
            )));
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.adam.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be positive".to_string()));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Config(format!(
                "lambda0 must be non-negative, got {}",
                self.lambda0
            )));
        }
        if self.batch_identities < 2 {
            return Err(Error::Config(
                "a batch needs at least 2 identities".to_string(),
            ));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be positive".to_string()));
        }
        if let TripletKind::Hinge { margin } = self.triplet {
            if !(margin >= 0.0) {
                return Err(Error::Config(format!(
                    "margin must be non-negative, got {margin}"
                )));
            }
        }
        Ok(())
    }

    pub fn lambda(&self, t: u64) -> f64 {
        lambda_schedule(
            t,
            self.lambda0,
            self.learning_rate.t0,
            self.learning_rate.t1,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    pub lr: f64,
    pub lambda: f64,
    pub loss: LossParts,
}

/// Hooks called by [`train`]. Both default to doing nothing.
pub trait TrainObserver {
    fn on_iteration(&mut self, _log: &IterationLog) -> Result<()> {
        Ok(())
    }

    /// Called after `completed` iterations when the cadence is due.
    fn on_checkpoint(&mut self, _completed: u64, _model: &FusionModel) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FusionModel,
    pub history: Vec<IterationLog>,
}

/// Batch loss averaged over items, with negatives mined from the batch pool.
pub fn batch_loss(
    model: &FusionModel,
    dataset: &Dataset,
    batch: &Batch,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    let pool = batch.pool();
    let pool_feats: Vec<(PersonId, Vec<f64>)> = pool
        .iter()
        .map(|&(pid, r)| Ok((pid, model.single_step(dataset.feature(r))?)))
        .collect::<Result<_>>()?;
    let mut acc = LossParts::default();
    for item in &batch.items {
        let seq: Vec<&[f64]> = item.sequence.iter().map(|&r| dataset.feature(r)).collect();
        let trace = model.fuse_sequence(&seq)?;
        let p = model.single_step(dataset.feature(item.positive))?;
        let mut negs = Vec::with_capacity(trace.len());
        for f in &trace.fused {
            let i = mine_negative(f, item.pid, &pool_feats)?;
            negs.push(pool_feats[i].1.clone());
        }
        let weights = LossWeights::new(lambda, trace.len(), cfg.monotonicity)?;
        acc.add(&total_loss(&trace.fused, &p, &negs, &weights, cfg.triplet)?);
    }
    Ok(acc.scaled(1.0 / batch.items.len() as f64))
}

/// Graph form of [`batch_loss`] with the block-ordered flat gradient.
pub fn batch_loss_and_grad(
    model: &FusionModel,
    dataset: &Dataset,
    batch: &Batch,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<(LossParts, Vec<f64>)> {
    let mut g = Graph::new();
    let gm = GraphModel::register(&mut g, model)?;
    let pool = batch.pool();
    let mut pool_nodes = Vec::with_capacity(pool.len());
    let mut pool_feats: Vec<(PersonId, Vec<f64>)> = Vec::with_capacity(pool.len());
    for &(pid, r) in &pool {
        let node = gm.single_step(&mut g, dataset.feature(r))?;
        pool_feats.push((pid, g.value(node).as_slice().to_vec()));
        pool_nodes.push(node);
    }
    let mut roots = Vec::with_capacity(batch.items.len());
    let mut acc = LossParts::default();
    let mut offset = 0;
    for item in &batch.items {
        let seq: Vec<&[f64]> = item.sequence.iter().map(|&r| dataset.feature(r)).collect();
        let fused = gm.fuse_sequence(&mut g, &seq)?;
        // the positive's single-step node follows the item's sequence in the pool
        let p = pool_nodes[offset + item.sequence.len()];
        offset += item.sequence.len() + 1;
        let mut negs = Vec::with_capacity(fused.len());
        for &f in &fused {
            let i = mine_negative(g.value(f).as_slice(), item.pid, &pool_feats)?;
            negs.push(pool_nodes[i]);
        }
        let weights = LossWeights::new(lambda, fused.len(), cfg.monotonicity)?;
        let (root, parts) = graph_sequence_loss(&mut g, &fused, p, &negs, &weights, cfg.triplet)?;
        acc.add(&parts);
        roots.push(root);
    }
    let summed = g.sum(&roots)?;
    let root = g.scale(summed, 1.0 / batch.items.len() as f64)?;
    g.backward(root)?;
    let mut parts = acc.scaled(1.0 / batch.items.len() as f64);
    parts.total = g.item(root);
    Ok((parts, gm.flat_grad(&g)))
}

/// Full training loop. Deterministic in `cfg.seed`.
pub fn train<O: TrainObserver + ?Sized>(
    dataset: &Dataset,
    cfg: &TrainConfig,
    observer: &mut O,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.identities(Split::Train).len() < 2 {
        return Err(Error::Dataset(
            "training needs at least 2 identities".to_string(),
        ));
    }
    let mut model = init_params(cfg.seed, dataset.dim(), cfg.hidden, cfg.gru_input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ BATCH_STREAM);
    let mut params = model.flatten();
    let mut state = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.iterations as usize);

    for t in 0..cfg.iterations {
        let diverged = |detail: alloc::string::String| Error::Divergence {
            iteration: t,
            detail,
        };
        let batch = build_batch(
            dataset,
            cfg.batch_identities,
            cfg.positive,
            cfg.camera_order,
            &mut rng,
        )?;
        let lr = cfg.learning_rate.value(t);
        let lambda = cfg.lambda(t);
        let (loss, grad) = match batch_loss_and_grad(&model, dataset, &batch, lambda, cfg) {
            Ok(v) => v,
            Err(Error::NonFinite(op)) => return Err(diverged(format!("non-finite value in {op}"))),
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged(format!("loss {}", loss.total)));
        }
        adam_step(&mut params, &grad, &mut state, lr, &cfg.adam)?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(diverged("parameters became non-finite".to_string()));
        }
        model.load_flat(&params)?;

        let log = IterationLog {
            iteration: t,
            lr,
            lambda,
            loss,
        };
        observer.on_iteration(&log)?;
        history.push(log);
        let done = t + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            observer.on_checkpoint(done, &model)?;
        }
    }
    Ok(TrainOutcome { model, history })
}

/// Loss of one sequence against a fixed positive and fixed per-index
/// negatives, all given as raw features.
pub fn sequence_loss<S: AsRef<[f64]>, N: AsRef<[f64]>>(
    model: &FusionModel,
    sequence: &[S],
    positive: &[f64],
    negatives: &[N],
    weights: &LossWeights,
    kind: TripletKind,
) -> Result<LossParts> {
    let trace = model.fuse_sequence(sequence)?;
    let p = model.single_step(positive)?;
    let negs = negatives
        .iter()
        .map(|n| model.single_step(n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    total_loss(&trace.fused, &p, &negs, weights, kind)
}

/// [`sequence_loss`] with the block-ordered flat gradient.
pub fn sequence_loss_and_grad<S: AsRef<[f64]>, N: AsRef<[f64]>>(
    model: &FusionModel,
    sequence: &[S],
    positive: &[f64],
    negatives: &[N],
    weights: &LossWeights,
    kind: TripletKind,
) -> Result<(LossParts, Vec<f64>)> {
    let mut g = Graph::new();
    let gm = GraphModel::register(&mut g, model)?;
    let fused = gm.fuse_sequence(&mut g, sequence)?;
    let p = gm.single_step(&mut g, positive)?;
    let negs = negatives
        .iter()
        .map(|n| gm.single_step(&mut g, n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let (root, parts) = graph_sequence_loss(&mut g, &fused, p, &negs, weights, kind)?;
    g.backward(root)?;
    Ok((parts, gm.flat_grad(&g)))
}
