use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seqfuse_core::data::{generate_synthetic, SyntheticSpec};
use seqfuse_core::diff::{Graph, Tensor};
use seqfuse_core::model::{FusionModel, GruInput};
use seqfuse_core::train::{
    batch_loss, batch_loss_and_grad, build_batch_seeded, sequence_loss, sequence_loss_and_grad,
    LossWeights, TrainConfig, TripletKind,
};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn random_model(
    rng: &mut ChaCha8Rng,
    dim: usize,
    hidden: usize,
    gru_input: GruInput,
) -> FusionModel {
    let mut m = FusionModel::zeros(dim, hidden);
    m.gru_input = gru_input;
    let flat = gaussian(rng, m.param_count(), 0.3);
    m.load_flat(&flat).unwrap();
    m
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn check_sequence_gradient(seed: u64, kind: TripletKind, gru_input: GruInput) -> f64 {
    let (dim, hidden, len) = (12, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(&mut rng, dim, hidden, gru_input);
    let seq: Vec<Vec<f64>> = (0..len).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let pos = gaussian(&mut rng, dim, 1.0);
    let negs: Vec<Vec<f64>> = (0..len).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let weights = LossWeights::new(0.7, len, true).unwrap();

    let (parts, analytic) =
        sequence_loss_and_grad(&model, &seq, &pos, &negs, &weights, kind).unwrap();
    let plain = sequence_loss(&model, &seq, &pos, &negs, &weights, kind).unwrap();
    assert!((parts.total - plain.total).abs() < 1e-12);

    let base = model.flatten();
    let h = 1e-6;
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] += h;
            m.load_flat(&p).unwrap();
            let up = sequence_loss(&m, &seq, &pos, &negs, &weights, kind)
                .unwrap()
                .total;
            p[i] -= 2.0 * h;
            m.load_flat(&p).unwrap();
            let down = sequence_loss(&m, &seq, &pos, &negs, &weights, kind)
                .unwrap()
                .total;
            (up - down) / (2.0 * h)
        })
        .collect();
    relative_error(&analytic, &numeric)
}

#[test]
fn sequence_loss_gradient_matches_finite_differences() {
    for trial in 0..20 {
        let err = check_sequence_gradient(trial, TripletKind::SoftMargin, GruInput::Pooled);
        assert!(err <= 1e-4, "trial {trial}: relative error {err:e}");
    }
}

#[test]
fn raw_input_and_hinge_variants_match_finite_differences() {
    for trial in 0..5 {
        let err = check_sequence_gradient(
            100 + trial,
            TripletKind::Hinge { margin: 0.3 },
            GruInput::Raw,
        );
        assert!(err <= 1e-4, "trial {trial}: relative error {err:e}");
    }
}

#[test]
fn batch_gradient_matches_finite_differences() {
    let spec = SyntheticSpec {
        train_identities: 6,
        test_identities: 0,
        dim: 6,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let cfg = TrainConfig {
        hidden: 5,
        ..TrainConfig::desk()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = random_model(&mut rng, 6, 5, GruInput::Pooled);
    let batch = build_batch_seeded(&ds, 4, 11).unwrap();
    let (parts, analytic) = batch_loss_and_grad(&model, &ds, &batch, 0.5, &cfg).unwrap();
    let plain = batch_loss(&model, &ds, &batch, 0.5, &cfg).unwrap();
    assert!((parts.total - plain.total).abs() < 1e-12);
    let base = model.flatten();
    let h = 1e-6;
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] += h;
            m.load_flat(&p).unwrap();
            let up = batch_loss(&m, &ds, &batch, 0.5, &cfg).unwrap().total;
            p[i] -= 2.0 * h;
            m.load_flat(&p).unwrap();
            let down = batch_loss(&m, &ds, &batch, 0.5, &cfg).unwrap().total;
            (up - down) / (2.0 * h)
        })
        .collect();
    let err = relative_error(&analytic, &numeric);
    assert!(err <= 1e-4, "relative error {err:e}");
}

/// Composite of every graph op in f32; tolerance reflects single precision.
#[test]
fn f32_graph_gradients_match_finite_differences() {
    fn eval(w: &[f32], x: &[f32], grads: bool) -> (f32, Vec<f32>, Vec<f32>) {
        let mut g: Graph<f32> = Graph::new();
        let wn = g.param(Tensor::matrix(3, 3, w.to_vec()).unwrap()).unwrap();
        let xn = g.param(Tensor::vector(x.to_vec())).unwrap();
        let y = g.matvec(wn, xn).unwrap();
        let a = g.sigmoid(y).unwrap();
        let b = g.tanh(xn).unwrap();
        let c = g.mul(a, b).unwrap();
        let d = g.softplus(c).unwrap();
        let e = g.sub(d, xn).unwrap();
        let pooled = g.mean_pool(&[a, e]).unwrap();
        let dist = g.euclidean(pooled, b).unwrap();
        let dist2 = g.euclidean(a, xn).unwrap();
        let lo = g.min(&[dist, dist2]).unwrap();
        let r = g.relu(lo).unwrap();
        let s = g.scale(r, 1.5).unwrap();
        let root = g.sum(&[s, dist2]).unwrap();
        if grads {
            g.backward(root).unwrap();
        }
        (g.item(root), g.grad(wn).to_vec(), g.grad(xn).to_vec())
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let w: Vec<f32> = (0..9).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let x: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let (_, gw, gx) = eval(&w, &x, true);
        let h = 1e-2f32;
        let fd = |v: &mut Vec<f32>, i: usize, is_w: bool| {
            v[i] += h;
            let up = if is_w {
                eval(v, &x, false).0
            } else {
                eval(&w, v, false).0
            };
            v[i] -= 2.0 * h;
            let down = if is_w {
                eval(v, &x, false).0
            } else {
                eval(&w, v, false).0
            };
            v[i] += h;
            (up - down) / (2.0 * h)
        };
        let mut wv = w.clone();
        let num_w: Vec<f64> = (0..9).map(|i| fd(&mut wv, i, true) as f64).collect();
        let mut xv = x.clone();
        let num_x: Vec<f64> = (0..3).map(|i| fd(&mut xv, i, false) as f64).collect();
        let an: Vec<f64> = gw.iter().chain(&gx).map(|&v| v as f64).collect();
        let nu: Vec<f64> = num_w.into_iter().chain(num_x).collect();
        let err = relative_error(&an, &nu);
        assert!(err <= 1e-2, "relative error {err:e}");
    }
}
