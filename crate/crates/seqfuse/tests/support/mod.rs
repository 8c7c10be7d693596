//! Independent oracles shared by the acceptance run: a brute-force protocol
//! scorer and a central-difference gradient check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seqfuse_core::data::{generate_synthetic, Dataset, Split, SyntheticSpec};
use seqfuse_core::eval::{Fuser, ProtocolPlan};
use seqfuse_core::model::{FusionModel, GruInput};
use seqfuse_core::train::{sequence_loss, sequence_loss_and_grad, LossWeights, TripletKind};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn selection_sort(d: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..d.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for j in 1..left.len() {
            let (a, b) = (left[j], left[best]);
            if d[a] < d[b] || (d[a] == d[b] && a < b) {
                best = j;
            }
        }
        out.push(left.remove(best));
    }
    out
}

struct Scores {
    hits: Vec<f64>,
    ap: Option<f64>,
}

fn score(query: &[f64], gallery: &[Vec<f64>], gallery_pid: &[u32], pid: u32, r: usize) -> Scores {
    let d: Vec<f64> = gallery.iter().map(|g| dist(query, g)).collect();
    let order = selection_sort(&d);
    let rel: Vec<bool> = order.iter().map(|&i| gallery_pid[i] == pid).collect();
    let total = rel.iter().filter(|&&x| x).count();
    let ap = (total > 0).then(|| {
        let mut s = 0.0;
        for k in 0..rel.len() {
            if rel[k] {
                let prec = rel[..=k].iter().filter(|&&x| x).count() as f64 / (k + 1) as f64;
                s += prec;
            }
        }
        s / total as f64
    });
    let first = rel.iter().position(|&x| x);
    let hits = (0..r)
        .map(|i| {
            if first.is_some_and(|f| f <= i) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Scores { hits, ap }
}

pub fn oracle_plan(
    model: &FusionModel,
    ds: &Dataset,
    plan: &ProtocolPlan,
    fuser: Fuser,
) -> (f64, f64, Vec<f64>) {
    let gallery_idx: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            ds.record(i).split == Split::Gallery
                && plan.gallery_cameras.contains(&ds.record(i).camera)
        })
        .collect();
    let gallery_pid: Vec<u32> = gallery_idx.iter().map(|&i| ds.record(i).pid).collect();
    let r = gallery_idx.len().min(50);
    let mut hits = vec![0.0; r];
    let mut aps = Vec::new();
    for &pid in &plan.identities {
        let mut seq: Vec<Vec<f64>> = Vec::new();
        for &c in &plan.query_cameras {
            let first = (0..ds.len())
                .filter(|&i| {
                    let rec = ds.record(i);
                    rec.split == Split::Query && rec.pid == pid && rec.camera == c
                })
                .min_by(|&a, &b| ds.record(a).id.cmp(&ds.record(b).id));
            if let Some(i) = first {
                seq.push(ds.feature(i).to_vec());
            }
        }
        let k = seq.len();
        let raw: Vec<Vec<f64>> = gallery_idx
            .iter()
            .map(|&i| ds.feature(i).to_vec())
            .collect();
        let per: Vec<Scores> = match fuser {
            Fuser::Gru => {
                let q = model.fuse_sequence(&seq).unwrap().fused[k - 1].clone();
                let g: Vec<Vec<f64>> = raw
                    .iter()
                    .map(|x| model.fuse_sequence(&vec![x.clone(); k]).unwrap().fused[k - 1].clone())
                    .collect();
                vec![score(&q, &g, &gallery_pid, pid, r)]
            }
            Fuser::Mean => {
                let mut q = vec![0.0; seq[0].len()];
                for x in &seq {
                    for (a, b) in q.iter_mut().zip(x) {
                        *a += b;
                    }
                }
                q.iter_mut().for_each(|v| *v /= k as f64);
                vec![score(&q, &raw, &gallery_pid, pid, r)]
            }
            Fuser::Max => {
                let q: Vec<f64> = (0..seq[0].len())
                    .map(|j| seq.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                vec![score(&q, &raw, &gallery_pid, pid, r)]
            }
            Fuser::SingleQuery => seq
                .iter()
                .map(|x| score(x, &raw, &gallery_pid, pid, r))
                .collect(),
        };
        let n = per.len() as f64;
        for (i, h) in hits.iter_mut().enumerate() {
            *h += per.iter().map(|s| s.hits[i]).sum::<f64>() / n;
        }
        let a: Vec<f64> = per.iter().filter_map(|s| s.ap).collect();
        if !a.is_empty() {
            aps.push(a.iter().sum::<f64>() / a.len() as f64);
        }
    }
    let q = plan.identities.len() as f64;
    let cmc: Vec<f64> = hits.iter().map(|h| h / q).collect();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    (cmc[0], map, cmc)
}

/// Random small instance: ≤ 8 query identities, ≤ 4 cameras, a few distractors.
pub fn random_instance(seed: u64) -> (Dataset, FusionModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cameras = rng.random_range(2..=4usize);
    let visibility: Vec<f64> = (0..cameras).map(|_| rng.random_range(0.0..1.0)).collect();
    let spec = SyntheticSpec {
        train_identities: 0,
        test_identities: rng.random_range(1..=8),
        distractors: rng.random_range(0..=2),
        cameras,
        dim: rng.random_range(2..=5),
        noise: rng.random_range(0.1..1.0),
        visibility,
        seed,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let model = FusionModel::init(seed, spec.dim, rng.random_range(2..=4)).unwrap();
    (ds, model)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Analytic vs central-difference gradient of the full sequence loss
/// (soft-margin triplet plus monotonicity) for a random model.
pub fn gradient_error(seed: u64, dim: usize, hidden: usize, len: usize, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = FusionModel::zeros(dim, hidden);
    model.gru_input = GruInput::Pooled;
    model
        .load_flat(&gaussian(&mut rng, model.param_count(), 0.3))
        .unwrap();
    let seq: Vec<Vec<f64>> = (0..len).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let pos = gaussian(&mut rng, dim, 1.0);
    let negs: Vec<Vec<f64>> = (0..len).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let weights = LossWeights::new(0.7, len, true).unwrap();
    let kind = TripletKind::SoftMargin;
    let (_, analytic) = sequence_loss_and_grad(&model, &seq, &pos, &negs, &weights, kind).unwrap();
    let base = model.flatten();
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] += step;
            m.load_flat(&p).unwrap();
            let up = sequence_loss(&m, &seq, &pos, &negs, &weights, kind)
                .unwrap()
                .total;
            p[i] -= 2.0 * step;
            m.load_flat(&p).unwrap();
            let down = sequence_loss(&m, &seq, &pos, &negs, &weights, kind)
                .unwrap()
                .total;
            (up - down) / (2.0 * step)
        })
        .collect();
    relative_error(&analytic, &numeric)
}
