//! Deterministic synthetic multi-camera feature sets.
//!
//! Each identity has a latent appearance vector `μ ~ N(0, latent_scale² I)`.
//! Camera `c` observes it through a near-identity orthogonal transform `A_c`
//! plus a bias `b_c`, and every record adds isotropic noise:
//! `x = A_c μ + b_c + σ ε`. Identities are visible in a random subset of
//! cameras whose size follows the visibility histogram.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{CameraId, Dataset, FeatureRecord, PersonId, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub train_identities: usize,
    pub test_identities: usize,
    /// Gallery-only identities seen in a single camera.
    pub distractors: usize,
    pub cameras: usize,
    pub dim: usize,
    pub latent_scale: f64,
    /// Std of the Gaussian perturbation of the identity before
    /// orthogonalisation; 0 gives `A_c = I`.
    pub transform_scale: f64,
    pub bias_scale: f64,
    pub noise: f64,
    /// Relative weight of "visible in exactly n cameras" for `n = 1, 2, ...`.
    pub visibility: Vec<f64>,
    /// Train records per (identity, camera) are drawn from `1..=train_per_camera`.
    pub train_per_camera: usize,
    /// Gallery records per (identity, camera) are drawn from `1..=gallery_per_camera`.
    pub gallery_per_camera: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            train_identities: 200,
            test_identities: 100,
            distractors: 0,
            cameras: 6,
            dim: 32,
            latent_scale: 1.0,
            transform_scale: 0.15,
            bias_scale: 0.3,
            noise: 0.24,
            visibility: Self::default_visibility(6),
            train_per_camera: 2,
            gallery_per_camera: 3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// No identity in a single camera; weight triples with every extra
    /// camera, so most identities are seen by all or nearly all cameras.
    /// A one-camera network gets all mass on that camera.
    pub fn default_visibility(cameras: usize) -> Vec<f64> {
        if cameras == 1 {
            return vec![1.0];
        }
        (1..=cameras)
            .map(|n| {
                if n < 2 {
                    0.0
                } else {
                    Float::powi(3.0f64, n as i32 - 2)
                }
            })
            .collect()
    }

    /// Same spec with a different camera count and a matching default histogram.
    pub fn with_cameras(mut self, cameras: usize) -> Self {
        self.cameras = cameras;
        self.visibility = Self::default_visibility(cameras);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("synthetic spec: {msg}")));
        if self.cameras == 0 || self.dim == 0 {
            return bad("cameras and dim must be at least 1");
        }
        if self.train_identities + self.test_identities == 0 {
            return bad("at least one identity is required");
        }
        if usize::from(CameraId::MAX) < self.cameras {
            return bad("too many cameras");
        }
        for (name, v) in [
            ("latent_scale", self.latent_scale),
            ("transform_scale", self.transform_scale),
            ("bias_scale", self.bias_scale),
            ("noise", self.noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "synthetic spec: {name} must be finite and ≥ 0, got {v}"
                )));
            }
        }
        if self.gallery_per_camera == 0 || self.train_per_camera == 0 {
            return bad("records per camera must be at least 1");
        }
        if self
            .visibility
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return bad("visibility weights must be finite and ≥ 0");
        }
        if self.visibility.iter().skip(self.cameras).any(|&w| w > 0.0) {
            return Err(Error::Config(format!(
                "synthetic spec: visibility histogram puts mass on more than {} cameras",
                self.cameras
            )));
        }
        if self.visibility.iter().take(self.cameras).sum::<f64>() <= 0.0 {
            return bad("visibility histogram has no mass");
        }
        if self.train_identities > 0 {
            if self.cameras < 2 {
                return bad("the train split needs at least 2 cameras to form sequences");
            }
            if self
                .visibility
                .iter()
                .take(self.cameras)
                .skip(1)
                .sum::<f64>()
                <= 0.0
            {
                return bad("the train split needs visibility mass on 2 or more cameras");
            }
        }
        Ok(())
    }
}

struct Camera {
    transform: Vec<f64>,
    bias: Vec<f64>,
}

/// Generates train, query and gallery splits. Pids `1..=train_identities`
/// are train identities, the next `test_identities` pids are test identities
/// and distractors follow.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;

    let cameras = draw_cameras(spec, &mut rng);

    let weights: Vec<f64> = spec.visibility.iter().take(spec.cameras).copied().collect();
    let any_count = WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("visibility histogram: {e}")))?;
    let multi_count = {
        let mut w = weights.clone();
        w[0] = 0.0;
        WeightedIndex::new(&w).ok()
    };

    let mut records = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng,
                    split: Split,
                    pid: PersonId,
                    camera: usize,
                    j: usize,
                    latent: &[f64]| {
        let cam = &cameras[camera];
        let feature = (0..d)
            .map(|r| {
                let row = &cam.transform[r * d..(r + 1) * d];
                let proj: f64 = row.iter().zip(latent).map(|(a, m)| a * m).sum();
                let noise: f64 = rng.sample(StandardNormal);
                proj + cam.bias[r] + spec.noise * noise
            })
            .collect();
        let camera_id = (camera + 1) as CameraId;
        records.push(FeatureRecord {
            id: format!("{split}-{pid:05}-c{camera_id}-{j}"),
            pid,
            camera: camera_id,
            split,
            feature,
            image: None,
        });
    };

    let total = spec.train_identities + spec.test_identities + spec.distractors;
    for n in 0..total {
        let pid = (n + 1) as PersonId;
        let latent: Vec<f64> = (0..d)
            .map(|_| spec.latent_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let is_train = n < spec.train_identities;
        let is_distractor = n >= spec.train_identities + spec.test_identities;

        let count = if is_distractor {
            1
        } else if is_train {
            // validate() guarantees mass on ≥ 2 cameras
            multi_count.as_ref().expect("validated").sample(&mut rng) + 1
        } else {
            any_count.sample(&mut rng) + 1
        };
        let mut visible = rand::seq::index::sample(&mut rng, spec.cameras, count).into_vec();
        visible.sort_unstable();

        for &camera in &visible {
            if is_train {
                let reps = rng.random_range(1..=spec.train_per_camera);
                for j in 0..reps {
                    emit(&mut rng, Split::Train, pid, camera, j, &latent);
                }
            } else {
                if !is_distractor {
                    emit(&mut rng, Split::Query, pid, camera, 0, &latent);
                }
                let reps = rng.random_range(1..=spec.gallery_per_camera);
                for j in 0..reps {
                    emit(&mut rng, Split::Gallery, pid, camera, j, &latent);
                }
            }
        }
    }
    Dataset::new(records, Some(spec.cameras))
}

/// Two passes of modified Gram-Schmidt over the rows of a `d × d` matrix.
fn orthonormalize_rows(m: &mut [f64], d: usize) {
    for _ in 0..2 {
        for i in 0..d {
            for j in 0..i {
                let dot: f64 = (0..d).map(|k| m[i * d + k] * m[j * d + k]).sum();
                for k in 0..d {
                    m[i * d + k] -= dot * m[j * d + k];
                }
            }
            let norm = Float::sqrt((0..d).map(|k| m[i * d + k] * m[i * d + k]).sum::<f64>());
            for k in 0..d {
                m[i * d + k] /= norm;
            }
        }
    }
}

/// `max |A Aᵀ − I|` for a row-major `d × d` matrix.
pub fn orthogonality_error(m: &[f64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = (0..d).map(|k| m[i * d + k] * m[j * d + k]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Camera transforms exactly as [`generate_synthetic`] draws them.
pub fn camera_transforms(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    draw_cameras(spec, &mut rng)
        .into_iter()
        .map(|c| c.transform)
        .collect()
}

fn draw_cameras(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Camera> {
    let d = spec.dim;
    (0..spec.cameras)
        .map(|_| {
            let mut m = vec![0.0; d * d];
            for (i, v) in m.iter_mut().enumerate() {
                let noise: f64 = rng.sample(StandardNormal);
                *v = spec.transform_scale * noise + if i % (d + 1) == 0 { 1.0 } else { 0.0 };
            }
            orthonormalize_rows(&mut m, d);
            let bias = (0..d)
                .map(|_| spec.bias_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Camera { transform: m, bias }
        })
        .collect()
}
