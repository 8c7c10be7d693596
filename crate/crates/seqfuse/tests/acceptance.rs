//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criteria 4 to 7 share one trained model: the default synthetic set,
//! `TrainConfig::desk()` with seed 0. Criterion 5 also trains the
//! triplet-only ablation and reports it next to the gated curve.

mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use seqfuse::service::{ConfirmRequest, CreateRequest, Engine, Service, SessionView};
use seqfuse_core::data::{generate_synthetic, CameraId, Dataset, Split, SyntheticSpec};
use seqfuse_core::eval::{
    fsp_plans, order_invariance_experiment, run_protocol, vsp_plans, EvalReport, Fuser,
    ProtocolPlan,
};
use seqfuse_core::model::FusionModel;
use seqfuse_core::train::{lr_schedule, train, LossWeights, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let errors: Vec<f64> = (0..20)
        .map(|t| support::gradient_error(t, 12, 8, 3, 1e-6))
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let took = start.elapsed();
    outcome(
        worst <= 1e-4 && took < Duration::from_secs(10),
        format!(
            "20 trials, H=8 D=12 T=3, worst relative error {worst:.2e}, {}",
            secs(took)
        ),
    )
}

fn all_cameras_dataset(n: usize) -> Dataset {
    let mut spec = SyntheticSpec {
        train_identities: 0,
        test_identities: 2,
        dim: 2,
        ..SyntheticSpec::default()
    }
    .with_cameras(n);
    spec.visibility = vec![0.0; n];
    spec.visibility[n - 1] = 1.0;
    generate_synthetic(&spec).unwrap()
}

fn formula_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for t in 1..=10 {
        let sum = LossWeights::new(1.0, t, true).unwrap().recency_sum();
        if sum != 1.0 {
            failures.push(format!("recency weights for T={t} sum to {sum:e}"));
        }
    }
    let lr = lr_schedule(20_000, &TrainConfig::default());
    if (lr - 3.1623e-6).abs() > 1e-10 {
        failures.push(format!("lr(20000) = {lr:e}"));
    }
    let mut counted = 0usize;
    for n in 2..=10usize {
        let ds = all_cameras_dataset(n);
        let vsp = vsp_plans(n, &ds).unwrap().len();
        if vsp != (1 << n) - 2 {
            failures.push(format!("VSP n={n}: {vsp} plans"));
        }
        counted += 1;
        for mask in 1..(1u32 << n) - 1 {
            let gallery: Vec<CameraId> = (0..n)
                .filter(|c| mask >> c & 1 == 1)
                .map(|c| c as CameraId + 1)
                .collect();
            let q = n - gallery.len();
            let fsp = fsp_plans(&gallery, &ds).unwrap().len();
            if fsp != (1 << q) - 1 {
                failures.push(format!("FSP n={n} gallery {gallery:?}: {fsp} plans"));
            }
            counted += 1;
        }
    }
    let took = start.elapsed();
    let pass = failures.is_empty() && took < Duration::from_secs(1);
    let detail = if failures.is_empty() {
        format!(
            "lr(20000) = {lr:.6e}, {counted} plan-count cases for n <= 10, {}",
            secs(took)
        )
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let (ds, model) = support::random_instance(seed);
        let mut plans: Vec<ProtocolPlan> = vsp_plans(ds.camera_count(), &ds).unwrap();
        plans.extend(fsp_plans(&[1], &ds).unwrap());
        plans.retain(|p| {
            !p.identities.is_empty()
                && p.gallery_cameras
                    .iter()
                    .any(|&c| !ds.camera_records(Split::Gallery, c).is_empty())
        });
        if plans.is_empty() {
            continue;
        }
        for fuser in Fuser::ALL {
            let report = run_protocol(&model, &ds, &plans, fuser).unwrap();
            for (plan, got) in plans.iter().zip(&report.plans) {
                let (r1, map, cmc) = support::oracle_plan(&model, &ds, plan, fuser);
                worst = worst.max((got.rank1 - r1).abs()).max((got.map - map).abs());
                if got.cmc.len() != cmc.len() {
                    worst = f64::INFINITY;
                }
                for (a, b) in got.cmc.iter().zip(&cmc) {
                    worst = worst.max((a - b).abs());
                }
                checked += 1;
            }
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= 1e-12 && took < Duration::from_secs(30) && checked > 0,
        format!(
            "200 instances, {checked} plan scores, max deviation {worst:.1e}, {}",
            secs(took)
        ),
    )
}

/// FSP reports over the six unit galleries.
struct UnitGalleries {
    reports: Vec<EvalReport>,
}

impl UnitGalleries {
    fn run(model: &FusionModel, ds: &Dataset, fuser: Fuser) -> Self {
        let reports = (1..=ds.camera_count() as CameraId)
            .map(|g| run_protocol(model, ds, &fsp_plans(&[g], ds).unwrap(), fuser).unwrap())
            .collect();
        Self { reports }
    }

    /// Rank-1 of size-`k` plans, averaged per gallery, then over galleries.
    fn rank1(&self, k: usize) -> f64 {
        mean(self.reports.iter().map(|r| r.summary(k).unwrap().rank1))
    }

    fn map(&self) -> f64 {
        mean(self.reports.iter().map(|r| r.mean_map()))
    }

    fn curve(&self) -> Vec<f64> {
        (1..self.reports.len()).map(|k| self.rank1(k)).collect()
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn pct_curve(c: &[f64]) -> String {
    c.iter()
        .map(|v| format!("{:.1}", 100.0 * v))
        .collect::<Vec<_>>()
        .join(" / ")
}

fn non_decreasing_within(c: &[f64], tol: f64) -> bool {
    c.windows(2).all(|w| w[1] >= w[0] - tol)
}

struct Trained {
    ds: Dataset,
    model: FusionModel,
    train_time: Duration,
}

fn train_default(monotonicity: bool) -> Trained {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let cfg = TrainConfig {
        monotonicity,
        ..TrainConfig::desk()
    };
    let start = Instant::now();
    let model = train(&ds, &cfg, &mut ()).unwrap().model;
    Trained {
        ds,
        model,
        train_time: start.elapsed(),
    }
}

fn fusion_benefit(t: &Trained, gru: &UnitGalleries, single: &UnitGalleries) -> Outcome {
    let gain = gru.rank1(3) - single.rank1(1);
    outcome(
        gain >= 0.05 && t.train_time < Duration::from_secs(300),
        format!(
            "GRU rank-1 at k=3 {:.1} vs single-query at k=1 {:.1}: +{:.1} points ({} training, 5000 iterations)",
            100.0 * gru.rank1(3),
            100.0 * single.rank1(1),
            100.0 * gain,
            secs(t.train_time)
        ),
    )
}

fn monotonicity(gru: &UnitGalleries, ablation: &UnitGalleries) -> Outcome {
    let with = gru.curve();
    let without = ablation.curve();
    outcome(
        non_decreasing_within(&with, 0.01),
        format!(
            "rank-1 k=1..5 with m-loss {} ; triplet-only {} ({})",
            pct_curve(&with),
            pct_curve(&without),
            if non_decreasing_within(&without, 0.01) {
                "also monotone"
            } else {
                "not monotone"
            }
        ),
    )
}

fn baseline(gru: &UnitGalleries, mean_pool: &UnitGalleries) -> Outcome {
    let (g, m) = (gru.map(), mean_pool.map());
    outcome(
        g >= m - 0.01,
        format!(
            "mAP GRU {:.1} vs mean-pool {:.1} (gap {:+.1} points)",
            100.0 * g,
            100.0 * m,
            100.0 * (g - m)
        ),
    )
}

fn order_robustness(t: &Trained) -> Outcome {
    let orders = 10;
    let mut per_order = vec![0.0; orders];
    let galleries = t.ds.camera_count();
    for g in 1..=galleries as CameraId {
        let plans = fsp_plans(&[g], &t.ds).unwrap();
        let full = plans.iter().max_by_key(|p| p.size()).unwrap();
        let r = order_invariance_experiment(&t.model, &t.ds, full, Fuser::Gru, orders, 0).unwrap();
        for (acc, v) in per_order.iter_mut().zip(&r.rank1) {
            *acc += v / galleries as f64;
        }
    }
    let lo = per_order.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_order.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        hi - lo <= 0.02,
        format!(
            "rank-1 over 10 query orders {:.1}..{:.1}, spread {:.2} points",
            100.0 * lo,
            100.0 * hi,
            100.0 * (hi - lo)
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_seqfuse"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEQFUSE_MANIFEST")
        .env_remove("SEQFUSE_CHECKPOINT")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let steps: [&[&str]; 3] = [
        &["gen", "--out", "data/manifest.jsonl", "--seed", "0"],
        &[
            "train",
            "--manifest",
            "data/manifest.jsonl",
            "--out",
            "model.ckpt",
            "--desk",
            "--iters",
            "300",
            "--seed",
            "0",
        ],
        &[
            "eval",
            "--manifest",
            "data/manifest.jsonl",
            "--checkpoint",
            "model.ckpt",
            "--out-dir",
            "report",
            "--protocol",
            "fsp",
            "--gallery",
            "1",
            "--order-check",
            "3",
        ],
    ];
    for dir in &runs {
        for step in steps {
            if !run_cli(dir.path(), step) {
                return outcome(false, format!("`seqfuse {}` failed", step.join(" ")));
            }
        }
    }
    let files = [
        "data/manifest.jsonl",
        "model.ckpt",
        "model.ckpt.loss.tsv",
        "report/report.json",
        "report/report.txt",
    ];
    let mut differing = Vec::new();
    let mut bytes = 0;
    for f in files {
        let a = std::fs::read(runs[0].path().join(f)).unwrap_or_default();
        let b = std::fs::read(runs[1].path().join(f)).unwrap_or_default();
        bytes += a.len();
        if a != b || a.is_empty() {
            differing.push(f);
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "gen/train/eval twice: {} files, {bytes} bytes identical",
                files.len()
            )
        } else {
            format!("outputs differ: {differing:?}")
        },
    )
}

fn fixed_clock_service(ds: &Arc<Dataset>, model: &Arc<FusionModel>) -> Service {
    Service::new(Engine::new(Arc::clone(ds), Some(Arc::clone(model)), true)).with_clock(|| 1_000)
}

/// Confirms the top-ranked record of the target identity in `camera`.
fn confirm_correct(svc: &mut Service, id: u64, camera: CameraId) -> Option<()> {
    let view = svc.engine().view(id, usize::MAX).ok()?;
    let pid = view.query.pid?;
    let list = view.lists.iter().find(|l| l.camera == camera)?;
    let record = list
        .entries
        .iter()
        .find(|e| e.pid == Some(pid))?
        .record
        .clone();
    svc.confirm(
        id,
        ConfirmRequest {
            camera,
            record,
            elapsed_ms: None,
        },
    )
    .ok()
}

fn service_replay(t: &Trained) -> Outcome {
    let ds = Arc::new(t.ds.clone());
    let model = Arc::new(t.model.clone());
    let cams = ds.camera_count() as CameraId;
    let full: Vec<u32> = ds
        .identities(Split::Query)
        .into_iter()
        .filter(|&p| {
            (1..=cams).all(|c| {
                !ds.records_of(Split::Query, p, c).is_empty()
                    && !ds.records_of(Split::Gallery, p, c).is_empty()
            })
        })
        .collect();
    if full.len() < 50 {
        return outcome(
            false,
            format!("only {} identities are seen in every camera", full.len()),
        );
    }

    // Transcript: one session, four confirmations, lists captured at every step.
    let query = ds
        .record(ds.records_of(Split::Query, full[0], 1)[0])
        .id
        .clone();
    let create = CreateRequest {
        query_record: query,
        fuser: Fuser::Gru,
        scope: None,
    };
    let mut live = fixed_clock_service(&ds, &model);
    let id = live.create(create.clone()).unwrap();
    let mut transcript: Vec<ConfirmRequest> = Vec::new();
    let mut views: Vec<SessionView> = vec![live.engine().view(id, usize::MAX).unwrap()];
    for camera in 2..=5 {
        confirm_correct(&mut live, id, camera).unwrap();
        let view = live.engine().view(id, usize::MAX).unwrap();
        let c = view.confirmations.last().unwrap();
        transcript.push(ConfirmRequest {
            camera: c.camera,
            record: c.record.clone(),
            elapsed_ms: None,
        });
        views.push(view);
    }
    let mut fresh = fixed_clock_service(&ds, &model);
    let rid = fresh.create(create).unwrap();
    let mut identical = fresh.engine().view(rid, usize::MAX).unwrap().lists == views[0].lists;
    for (step, req) in transcript.into_iter().enumerate() {
        fresh.confirm(rid, req).unwrap();
        identical &= fresh.engine().view(rid, usize::MAX).unwrap().lists == views[step + 1].lists;
    }

    // 50 ground-truth sessions: query in camera 1, confirm cameras 2..5 in
    // order, watch the first-correct rank in camera 6 and in every open camera.
    let mut held_out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut open: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut svc = fixed_clock_service(&ds, &model);
    for &pid in full.iter().take(50) {
        let query = ds.record(ds.records_of(Split::Query, pid, 1)[0]).id.clone();
        let id = svc
            .create(CreateRequest {
                query_record: query,
                fuser: Fuser::Gru,
                scope: None,
            })
            .unwrap();
        for next in 2..=cams {
            let view = svc.engine().view(id, 0).unwrap();
            for l in &view.lists {
                let rank = l.first_correct.unwrap() as f64;
                open.entry(view.k).or_default().push(rank);
                if l.camera == cams {
                    held_out.entry(view.k).or_default().push(rank);
                }
            }
            if next < cams {
                confirm_correct(&mut svc, id, next).unwrap();
            }
        }
    }
    let held: Vec<f64> = held_out.values().map(|v| mean(v.iter().copied())).collect();
    let all: Vec<f64> = open.values().map(|v| mean(v.iter().copied())).collect();
    let fmt = |c: &[f64]| {
        c.iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
            .join(" / ")
    };
    let monotone = held.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        identical && monotone,
        format!(
            "replay {} ; mean first-correct rank k=1..5 in camera {cams}: {} (all open cameras: {})",
            if identical { "identical at all 5 steps" } else { "DIFFERS" },
            fmt(&held),
            fmt(&all)
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {n} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    report(1, "gradient check", gradient_check());
    report(2, "formula suite", formula_suite());
    report(3, "metric oracle", metric_oracle());

    let trained = train_default(true);
    let ablation = train_default(false);
    let gru = UnitGalleries::run(&trained.model, &trained.ds, Fuser::Gru);
    let single = UnitGalleries::run(&trained.model, &trained.ds, Fuser::SingleQuery);
    let mean_pool = UnitGalleries::run(&trained.model, &trained.ds, Fuser::Mean);
    let ablation_gru = UnitGalleries::run(&ablation.model, &ablation.ds, Fuser::Gru);
    report(4, "fusion benefit", fusion_benefit(&trained, &gru, &single));
    report(5, "monotonicity", monotonicity(&gru, &ablation_gru));
    report(6, "baseline comparison", baseline(&gru, &mean_pool));
    report(7, "order robustness", order_robustness(&trained));
    report(8, "determinism", determinism());
    report(9, "service replay", service_replay(&trained));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
