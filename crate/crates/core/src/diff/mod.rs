//! Minimal reverse-mode differentiation over dense vectors and matrices.
//!
//! A [`Graph`] is built fresh for every training step: parameters and inputs
//! enter as leaves, each op appends a node holding its forward value, and
//! [`Graph::backward`] walks the node list in reverse creation order (which is
//! a reverse topological order) exactly once. Dropping the graph frees the
//! tape; nothing persists across steps.
//!
//! Scalars are generic over [`Real`] so the same code runs in `f64` (the test
//! and training default) and `f32`.

mod graph;
mod tensor;

pub use graph::{Binary, Graph, NodeId, Unary};
pub use tensor::{Shape, Tensor};

use core::fmt::Debug;
use num_traits::Float;

/// Floating point scalar usable in a [`Graph`].
pub trait Real: Float + Debug + Default + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}
