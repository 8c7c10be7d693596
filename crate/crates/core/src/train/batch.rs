use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PersonId, RecordIdx, Split};
use crate::error::{Error, Result};
use crate::math::euclidean;

/// Where the shared positive comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveSource {
    /// One camera of the identity's own sequence, omitted from the fused input.
    #[default]
    OwnSequence,
    /// Another record of the same identity not used in the sequence; falls
    /// back to the own-sequence rule when none exists.
    CrossSequence,
}

/// Camera order of the fused input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraOrder {
    #[default]
    Ascending,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub pid: PersonId,
    /// Fused input, one record per camera.
    pub sequence: Vec<RecordIdx>,
    pub positive: RecordIdx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

impl Batch {
    /// Every record appearing in the batch, item by item, sequence then positive.
    pub fn pool(&self) -> Vec<(PersonId, RecordIdx)> {
        let mut out = Vec::new();
        for item in &self.items {
            out.extend(item.sequence.iter().map(|&r| (item.pid, r)));
            out.push((item.pid, item.positive));
        }
        out
    }
}

/// Samples up to `identities` training identities with at least two cameras.
pub fn build_batch<R: Rng + ?Sized>(
    dataset: &Dataset,
    identities: usize,
    positive: PositiveSource,
    order: CameraOrder,
    rng: &mut R,
) -> Result<Batch> {
    let all = dataset.identities(Split::Train);
    let mut eligible = Vec::with_capacity(all.len());
    for pid in all {
        if dataset.cameras_of(Split::Train, pid).len() >= 2 {
            eligible.push(pid);
        } else {
            log::warn!("identity {pid} seen by fewer than two cameras, skipped");
        }
    }
    if eligible.len() < 2 {
        return Err(Error::Batch(format!(
            "{} eligible identities, need at least 2",
            eligible.len()
        )));
    }
    if eligible.len() < identities {
        log::warn!(
            "only {} eligible identities for a batch of {identities}",
            eligible.len()
        );
    }
    let take = identities.min(eligible.len()).max(2);
    let chosen = rand::seq::index::sample(rng, eligible.len(), take);

    let mut items = Vec::with_capacity(take);
    for i in chosen.iter() {
        let pid = eligible[i];
        let cameras = dataset.cameras_of(Split::Train, pid);
        let mut picks: Vec<RecordIdx> = cameras
            .iter()
            .map(|&c| {
                let recs = dataset.records_of(Split::Train, pid, c);
                recs[rng.random_range(0..recs.len())]
            })
            .collect();
        let spare: Vec<RecordIdx> = match positive {
            PositiveSource::OwnSequence => Vec::new(),
            PositiveSource::CrossSequence => cameras
                .iter()
                .flat_map(|&c| dataset.records_of(Split::Train, pid, c).iter().copied())
                .filter(|r| !picks.contains(r))
                .collect(),
        };
        let pos = if spare.is_empty() {
            let held = rng.random_range(0..picks.len());
            picks.remove(held)
        } else {
            spare[rng.random_range(0..spare.len())]
        };
        if order == CameraOrder::Shuffled {
            picks.shuffle(rng);
        }
        items.push(BatchItem {
            pid,
            sequence: picks,
            positive: pos,
        });
    }
    Ok(Batch { items })
}

/// [`build_batch`] with the default positive rule and ascending cameras.
pub fn build_batch_seeded(dataset: &Dataset, identities: usize, seed: u64) -> Result<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_batch(
        dataset,
        identities,
        PositiveSource::OwnSequence,
        CameraOrder::Ascending,
        &mut rng,
    )
}

/// Index into `candidates` of the nearest one with a different identity.
/// Ties go to the lowest index.
pub fn mine_negative<S: AsRef<[f64]>>(
    anchor: &[f64],
    anchor_pid: PersonId,
    candidates: &[(PersonId, S)],
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (pid, feat)) in candidates.iter().enumerate() {
        if *pid == anchor_pid {
            continue;
        }
        let d = euclidean(anchor, feat.as_ref());
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| {
        Error::Batch(format!(
            "no candidate with identity other than {anchor_pid}"
        ))
    })
}
