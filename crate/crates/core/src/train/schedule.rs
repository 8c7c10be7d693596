use serde::{Deserialize, Serialize};

use super::TrainConfig;

/// `v(t) = v₀` for `t ≤ t₀`, `v₀ · 0.001^((t − t₀)/(t₁ − t₀))` afterwards.
/// The exponent is clamped at 1, so the value stays at `v₀ · 0.001` past `t₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial: f64,
    pub t0: u64,
    pub t1: u64,
}

impl Schedule {
    pub const FLOOR_FACTOR: f64 = 0.001;

    pub fn value(&self, t: u64) -> f64 {
        if t <= self.t0 {
            return self.initial;
        }
        let span = self.t1.saturating_sub(self.t0).max(1) as f64;
        let exponent = ((t - self.t0) as f64 / span).min(1.0);
        self.initial * num_traits::Float::powf(Self::FLOOR_FACTOR, exponent)
    }
}

pub fn lr_schedule(t: u64, cfg: &TrainConfig) -> f64 {
    cfg.learning_rate.value(t)
}

/// Triplet weight λ(t), same breakpoints as the learning rate.
pub fn lambda_schedule(t: u64, lambda0: f64, t0: u64, t1: u64) -> f64 {
    Schedule {
        initial: lambda0,
        t0,
        t1,
    }
    .value(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn full_scale() -> Schedule {
        Schedule {
            initial: 1e-4,
            t0: 15_000,
            t1: 25_000,
        }
    }

    #[test]
    fn learning_rate_examples() {
        let s = full_scale();
        assert_eq!(s.value(10_000), 1e-4);
        assert_relative_eq!(s.value(25_000), 1e-7, max_relative = 1e-12);
        assert!((s.value(20_000) - 3.1623e-6).abs() < 1e-10);
        assert_relative_eq!(s.value(40_000), 1e-7, max_relative = 1e-12);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_schedule(0, 0.01, 15_000, 25_000), 0.01);
        assert_eq!(lambda_schedule(15_000, 0.01, 15_000, 25_000), 0.01);
        assert_relative_eq!(
            lambda_schedule(25_000, 0.01, 15_000, 25_000),
            1e-5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn continuous_at_t0_and_non_increasing() {
        let s = full_scale();
        assert_relative_eq!(s.value(15_000), s.value(15_001), max_relative = 1e-3);
        let mut prev = f64::INFINITY;
        for t in (0..40_000).step_by(7) {
            let v = s.value(t);
            assert!(v <= prev);
            prev = v;
        }
    }
}
