use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, first_correct_rank, rank_gallery, CMC_MAX_RANK};
use super::plan::{Protocol, ProtocolPlan};
use crate::data::{CameraId, Dataset, PersonId, RecordIdx, Split};
use crate::error::{Error, Result};
use crate::model::{pool_fuse, FusionModel, PoolKind};

/// How a query sequence becomes a single comparison vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fuser {
    /// Recurrent fusion; gallery features are fused from `k` repeats.
    Gru,
    Mean,
    Max,
    /// Each query camera ranked on its own raw feature, metrics averaged.
    SingleQuery,
}

impl Fuser {
    pub const ALL: [Fuser; 4] = [Fuser::Gru, Fuser::Mean, Fuser::Max, Fuser::SingleQuery];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuser::Gru => "gru",
            Fuser::Mean => "mean",
            Fuser::Max => "max",
            Fuser::SingleQuery => "single-query",
        }
    }
}

impl core::fmt::Display for Fuser {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Fuser {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fuser::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown fuser `{s}`")))
    }
}

/// Scores of one query identity. For the single-query fuser every field is
/// the mean over the identity's query cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub pid: PersonId,
    pub first_correct: Option<f64>,
    pub average_precision: Option<f64>,
    /// Hit indicator at ranks `1..=R`.
    pub hits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub plan: usize,
    pub protocol: Protocol,
    pub fuser: Fuser,
    pub gallery_cameras: Vec<CameraId>,
    pub query_cameras: Vec<CameraId>,
    pub rank1: f64,
    pub map: f64,
    pub cmc: Vec<f64>,
    pub first_correct: Vec<Option<f64>>,
    pub queries: usize,
    /// Queries left out of the mAP for lack of a relevant gallery item.
    pub excluded: usize,
}

impl PlanResult {
    pub fn size(&self) -> usize {
        self.query_cameras.len()
    }
}

/// Plan metrics averaged over plans of one query-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    pub plans: usize,
    pub rank1: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fuser: Fuser,
    pub plans: Vec<PlanResult>,
    pub by_size: Vec<SizeSummary>,
}

impl EvalReport {
    pub fn from_plans(fuser: Fuser, plans: Vec<PlanResult>) -> Self {
        let mut groups: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
        for p in &plans {
            let e = groups.entry(p.size()).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += p.rank1;
            e.2 += p.map;
        }
        let by_size = groups
            .into_iter()
            .map(|(size, (n, r1, map))| SizeSummary {
                size,
                plans: n,
                rank1: r1 / n as f64,
                map: map / n as f64,
            })
            .collect();
        Self {
            fuser,
            plans,
            by_size,
        }
    }

    pub fn summary(&self, size: usize) -> Option<&SizeSummary> {
        self.by_size.iter().find(|s| s.size == size)
    }

    pub fn mean_rank1(&self) -> f64 {
        mean(self.plans.iter().map(|p| p.rank1))
    }

    pub fn mean_map(&self) -> f64 {
        mean(self.plans.iter().map(|p| p.map))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

struct Gallery {
    records: Vec<RecordIdx>,
    pids: Vec<PersonId>,
    /// Comparison vectors keyed by repetition count (0 = raw features).
    cache: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl Gallery {
    fn new(dataset: &Dataset, cameras: &[CameraId]) -> Self {
        let mut records: Vec<RecordIdx> = cameras
            .iter()
            .flat_map(|&c| dataset.camera_records(Split::Gallery, c))
            .collect();
        records.sort_unstable();
        let pids = records.iter().map(|&r| dataset.record(r).pid).collect();
        Self {
            records,
            pids,
            cache: BTreeMap::new(),
        }
    }

    fn features(
        &mut self,
        model: &FusionModel,
        dataset: &Dataset,
        repeats: usize,
    ) -> Result<&[Vec<f64>]> {
        if !self.cache.contains_key(&repeats) {
            let feats = self
                .records
                .iter()
                .map(|&r| {
                    let x = dataset.feature(r);
                    if repeats == 0 {
                        Ok(x.to_vec())
                    } else {
                        model.repeated(x, repeats)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(repeats, feats);
        }
        Ok(&self.cache[&repeats])
    }

    fn score(
        &self,
        query: &[f64],
        pid: PersonId,
        feats: &[Vec<f64>],
        max_rank: usize,
    ) -> (Option<usize>, Option<f64>, Vec<f64>) {
        let order = rank_gallery(query, feats);
        let relevant: Vec<bool> = order.iter().map(|&i| self.pids[i] == pid).collect();
        let first = first_correct_rank(&relevant);
        let hits = (1..=max_rank)
            .map(|r| {
                if first.is_some_and(|f| f <= r) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (first, average_precision(&relevant), hits)
    }
}

/// Query records of `pid` in the plan's camera order: the first record
/// (by id) in each camera where the identity appears.
fn query_sequence(dataset: &Dataset, plan: &ProtocolPlan, pid: PersonId) -> Result<Vec<RecordIdx>> {
    let mut seq = Vec::with_capacity(plan.query_cameras.len());
    for &c in &plan.query_cameras {
        match dataset.records_of(Split::Query, pid, c).first() {
            Some(&r) => seq.push(r),
            None if plan.protocol == Protocol::Fsp => {
                return Err(Error::Plan(format!(
                    "identity {pid} has no query record in camera {c}"
                )));
            }
            None => {}
        }
    }
    Ok(seq)
}

fn evaluate_in(
    model: &FusionModel,
    dataset: &Dataset,
    plan: &ProtocolPlan,
    fuser: Fuser,
    gallery: &mut Gallery,
) -> Result<PlanResult> {
    if gallery.records.is_empty() {
        return Err(Error::Plan(format!(
            "plan {} has an empty gallery",
            plan.id
        )));
    }
    let max_rank = CMC_MAX_RANK.min(gallery.records.len());
    let mut outcomes = Vec::with_capacity(plan.identities.len());
    for &pid in &plan.identities {
        let seq = query_sequence(dataset, plan, pid)?;
        if seq.is_empty() {
            return Err(Error::Plan(format!(
                "identity {pid} has no query record in plan {}",
                plan.id
            )));
        }
        let feats: Vec<&[f64]> = seq.iter().map(|&r| dataset.feature(r)).collect();
        let outcome = match fuser {
            Fuser::SingleQuery => {
                let raw = gallery.features(model, dataset, 0)?.to_vec();
                let mut firsts = Vec::new();
                let mut aps = Vec::new();
                let mut hits = vec![0.0; max_rank];
                for x in &feats {
                    let (f, ap, h) = gallery.score(x, pid, &raw, max_rank);
                    firsts.extend(f.map(|v| v as f64));
                    aps.extend(ap);
                    hits.iter_mut().zip(h).for_each(|(a, b)| *a += b);
                }
                let n = feats.len() as f64;
                hits.iter_mut().for_each(|v| *v /= n);
                QueryOutcome {
                    pid,
                    first_correct: (!firsts.is_empty()).then(|| mean(firsts.iter().copied())),
                    average_precision: (!aps.is_empty()).then(|| mean(aps.iter().copied())),
                    hits,
                }
            }
            _ => {
                let (query, repeats) = match fuser {
                    Fuser::Gru => (model.fuse_sequence(&feats)?.last().to_vec(), feats.len()),
                    Fuser::Mean => (pool_fuse(PoolKind::Mean, &feats)?, 0),
                    _ => (pool_fuse(PoolKind::Max, &feats)?, 0),
                };
                let g = gallery.features(model, dataset, repeats)?.to_vec();
                let (f, ap, hits) = gallery.score(&query, pid, &g, max_rank);
                QueryOutcome {
                    pid,
                    first_correct: f.map(|v| v as f64),
                    average_precision: ap,
                    hits,
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(summarise(plan, fuser, &outcomes, max_rank))
}

fn summarise(
    plan: &ProtocolPlan,
    fuser: Fuser,
    outcomes: &[QueryOutcome],
    max_rank: usize,
) -> PlanResult {
    let n = outcomes.len();
    let mut cmc = vec![0.0; max_rank];
    for o in outcomes {
        cmc.iter_mut().zip(&o.hits).for_each(|(a, b)| *a += b);
    }
    if n > 0 {
        cmc.iter_mut().for_each(|v| *v /= n as f64);
    }
    let aps: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.average_precision)
        .collect();
    let excluded = n - aps.len();
    if excluded > 0 {
        log::warn!(
            "plan {}: {excluded} queries without a relevant gallery item left out of mAP",
            plan.id
        );
    }
    PlanResult {
        plan: plan.id,
        protocol: plan.protocol,
        fuser,
        gallery_cameras: plan.gallery_cameras.clone(),
        query_cameras: plan.query_cameras.clone(),
        rank1: cmc.first().copied().unwrap_or(0.0),
        map: mean(aps.iter().copied()),
        cmc,
        first_correct: outcomes.iter().map(|o| o.first_correct).collect(),
        queries: n,
        excluded,
    }
}

/// Scores one plan.
pub fn evaluate_plan(
    model: &FusionModel,
    dataset: &Dataset,
    plan: &ProtocolPlan,
    fuser: Fuser,
) -> Result<PlanResult> {
    let mut gallery = Gallery::new(dataset, &plan.gallery_cameras);
    evaluate_in(model, dataset, plan, fuser, &mut gallery)
}

/// Scores every plan in order, reusing gallery features across plans that
/// share a gallery.
pub fn run_protocol(
    model: &FusionModel,
    dataset: &Dataset,
    plans: &[ProtocolPlan],
    fuser: Fuser,
) -> Result<EvalReport> {
    if plans.is_empty() {
        return Err(Error::Plan("no plans to evaluate".into()));
    }
    let mut galleries: BTreeMap<Vec<CameraId>, Gallery> = BTreeMap::new();
    let mut results = Vec::with_capacity(plans.len());
    for plan in plans {
        let gallery = galleries
            .entry(plan.gallery_cameras.clone())
            .or_insert_with(|| Gallery::new(dataset, &plan.gallery_cameras));
        results.push(evaluate_in(model, dataset, plan, fuser, gallery)?);
    }
    Ok(EvalReport::from_plans(fuser, results))
}

/// `count` random permutations of `0..len`, deterministic in `seed`.
pub fn random_orders(len: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p: Vec<usize> = (0..len).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub orders: Vec<Vec<CameraId>>,
    pub rank1: Vec<f64>,
    pub map: Vec<f64>,
    pub rank1_spread: f64,
    pub map_spread: f64,
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Re-scores `plan` under `num_orders` random query-camera orders.
pub fn order_invariance_experiment(
    model: &FusionModel,
    dataset: &Dataset,
    plan: &ProtocolPlan,
    fuser: Fuser,
    num_orders: usize,
    seed: u64,
) -> Result<OrderReport> {
    let mut gallery = Gallery::new(dataset, &plan.gallery_cameras);
    let mut report = OrderReport {
        orders: Vec::new(),
        rank1: Vec::new(),
        map: Vec::new(),
        rank1_spread: 0.0,
        map_spread: 0.0,
    };
    for perm in random_orders(plan.size(), num_orders, seed) {
        let mut p = plan.clone();
        p.query_cameras = perm.iter().map(|&i| plan.query_cameras[i]).collect();
        let r = evaluate_in(model, dataset, &p, fuser, &mut gallery)?;
        report.orders.push(p.query_cameras);
        report.rank1.push(r.rank1);
        report.map.push(r.map);
    }
    report.rank1_spread = spread(&report.rank1);
    report.map_spread = spread(&report.map);
    Ok(report)
}
