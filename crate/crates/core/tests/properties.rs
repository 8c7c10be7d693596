use proptest::prelude::*;

use seqfuse_core::data::{generate_synthetic, SyntheticSpec};
use seqfuse_core::eval::{
    average_precision, cmc, fsp_plans, order_invariance_experiment, rank_gallery, vsp_plans, Fuser,
};
use seqfuse_core::math::compensated_sum;
use seqfuse_core::model::{pool_fuse, FusionModel, PoolKind};
use seqfuse_core::train::{
    hinge_triplet, lambda_r, lambda_schedule, monotonicity_loss, soft_triplet, LossWeights,
    Schedule,
};

fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n)
}

proptest! {
    #[test]
    fn triplet_terms_are_non_negative(v in vectors(3, 4), m in 0.0f64..2.0) {
        prop_assert!(soft_triplet(&v[0], &v[1], &v[2]) > 0.0);
        prop_assert!(hinge_triplet(&v[0], &v[1], &v[2], m) >= 0.0);
    }

    #[test]
    fn monotonicity_is_zero_exactly_when_steps_improve(
        fused in vectors(4, 3), p in prop::collection::vec(-5.0f64..5.0, 3), negs in vectors(4, 3), t in 1usize..=4,
    ) {
        let loss = monotonicity_loss(&fused, &p, &negs, t).unwrap();
        prop_assert!(loss >= 0.0);
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let best_p = (0..t - 1).map(|tau| d(&fused[tau], &p)).fold(f64::INFINITY, f64::min);
        let best_n = (0..t - 1).map(|tau| d(&fused[tau], &negs[tau])).fold(f64::NEG_INFINITY, f64::max);
        let cond = t == 1 || (d(&fused[t - 1], &p) <= best_p && d(&fused[t - 1], &negs[t - 1]) >= best_n);
        prop_assert_eq!(loss == 0.0, cond);
    }

    #[test]
    fn recency_weights_sum_to_one_and_increase(len in 1usize..200) {
        let w = LossWeights::new(0.01, len, true).unwrap();
        prop_assert_eq!(compensated_sum(w.recency.iter().copied()), 1.0);
        prop_assert!(w.recency.windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(w.recency[len - 1], lambda_r(len, len).unwrap());
    }

    #[test]
    fn schedules_are_non_increasing(initial in 1e-6f64..1.0, t0 in 0u64..1000, span in 1u64..1000, a in 0u64..3000, b in 0u64..3000) {
        let s = Schedule { initial, t0, t1: t0 + span };
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(s.value(hi) <= s.value(lo));
        prop_assert!(s.value(hi) >= initial * 0.001 * (1.0 - 1e-12));
        prop_assert_eq!(lambda_schedule(lo, initial, t0, t0 + span), s.value(lo));
    }

    #[test]
    fn ranking_is_a_stable_permutation(q in prop::collection::vec(-3.0f64..3.0, 2), g in vectors(12, 2)) {
        let order = rank_gallery(&q, &g);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..g.len()).collect::<Vec<_>>());
        let d = |i: usize| g[i].iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for w in order.windows(2) {
            prop_assert!(d(w[0]) < d(w[1]) || (d(w[0]) == d(w[1]) && w[0] < w[1]));
        }
    }

    #[test]
    fn metrics_are_bounded_and_cumulative(rel in prop::collection::vec(any::<bool>(), 1..40), firsts in prop::collection::vec(prop::option::of(1usize..20), 1..20)) {
        if let Some(ap) = average_precision(&rel) {
            prop_assert!((0.0..=1.0).contains(&ap));
        } else {
            prop_assert!(rel.iter().all(|r| !r));
        }
        let curve = cmc(&firsts, 20);
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(curve.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn pooling_ignores_order(mut v in vectors(5, 3), seed in any::<u64>()) {
        let mean = pool_fuse(PoolKind::Mean, &v).unwrap();
        let max = pool_fuse(PoolKind::Max, &v).unwrap();
        let k = (seed % 5) as usize;
        v.rotate_left(k);
        let mean2 = pool_fuse(PoolKind::Mean, &v).unwrap();
        for (a, b) in mean.iter().zip(&mean2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(max, pool_fuse(PoolKind::Max, &v).unwrap());
    }

    #[test]
    fn fused_states_stay_inside_the_unit_cube(v in vectors(6, 4), seed in any::<u64>()) {
        let model = FusionModel::init(seed, 4, 5).unwrap();
        let trace = model.fuse_sequence(&v).unwrap();
        prop_assert!(trace.fused.iter().flatten().all(|x| x.abs() < 1.0));
    }
}

#[test]
fn plan_counts_match_closed_forms() {
    for n in 2..=10usize {
        let spec = SyntheticSpec {
            train_identities: 0,
            test_identities: 3,
            dim: 2,
            ..SyntheticSpec::default()
        }
        .with_cameras(n);
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!(vsp_plans(n, &ds).unwrap().len(), (1 << n) - 2);
    }
    assert!(vsp_plans(
        1,
        &generate_synthetic(
            &SyntheticSpec {
                train_identities: 0,
                ..SyntheticSpec::default()
            }
            .with_cameras(1)
        )
        .unwrap()
    )
    .is_err());
}

#[test]
fn fsp_counts_and_fixed_identities() {
    for n in 2..=10usize {
        let mut spec = SyntheticSpec {
            train_identities: 0,
            test_identities: 4,
            dim: 2,
            ..SyntheticSpec::default()
        }
        .with_cameras(n);
        // everyone in every camera so each gallery has eligible identities
        spec.visibility = vec![0.0; n];
        spec.visibility[n - 1] = 1.0;
        let ds = generate_synthetic(&spec).unwrap();
        for g in 1..=n as u16 {
            let plans = fsp_plans(&[g], &ds).unwrap();
            assert_eq!(plans.len(), (1 << (n - 1)) - 1);
            assert!(plans.iter().all(|p| p.identities == plans[0].identities));
            assert_eq!(plans[0].identities.len(), 4);
            assert!(plans.iter().all(|p| !p.query_cameras.contains(&g)));
        }
        if n >= 3 {
            assert_eq!(fsp_plans(&[1, 2], &ds).unwrap().len(), (1 << (n - 2)) - 1);
        }
    }
}

#[test]
fn fsp_without_full_coverage_identities_is_empty() {
    let mut spec = SyntheticSpec {
        train_identities: 0,
        test_identities: 5,
        ..SyntheticSpec::default()
    }
    .with_cameras(4);
    spec.visibility = vec![0.0, 1.0, 0.0, 0.0];
    let ds = generate_synthetic(&spec).unwrap();
    assert!(fsp_plans(&[1], &ds).unwrap().is_empty());
}

#[test]
fn mean_pool_order_spread_is_zero() {
    let spec = SyntheticSpec {
        train_identities: 0,
        test_identities: 20,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let model = FusionModel::init(1, spec.dim, 8).unwrap();
    let plan = fsp_plans(&[1], &ds).unwrap().pop().unwrap();
    let report = order_invariance_experiment(&model, &ds, &plan, Fuser::Mean, 10, 3).unwrap();
    assert_eq!(report.rank1_spread, 0.0);
    assert_eq!(report.map_spread, 0.0);
    let single = fsp_plans(&[1], &ds)
        .unwrap()
        .into_iter()
        .find(|p| p.size() == 1)
        .unwrap();
    let report = order_invariance_experiment(&model, &ds, &single, Fuser::Gru, 5, 3).unwrap();
    assert_eq!(report.rank1_spread, 0.0);
}
