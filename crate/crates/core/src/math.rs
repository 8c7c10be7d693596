//! Plain `f64` numerics shared by the inference paths.
//!
//! These mirror the differentiable ops in [`crate::diff`] without recording a
//! graph; the graph versions are checked against them in tests.

use num_traits::Float;

/// Above this argument softplus is evaluated as `x + ln(1 + e^-x)`.
pub const SOFTPLUS_LINEAR_THRESHOLD: f64 = 30.0;

pub fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus<T: Float>(x: T) -> T {
    let threshold = T::from(SOFTPLUS_LINEAR_THRESHOLD).unwrap();
    if x > threshold {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Euclidean (not squared) distance. Panics if lengths differ.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "euclidean: length mismatch");
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
