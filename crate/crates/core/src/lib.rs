//! Sequential multi-camera feature fusion for person re-identification.
//!
//! A query identity observed in several cameras is summarised by a recurrent
//! fusion network: per-camera features pass through a linear embedding, are
//! mean-pooled up to the current index and fed to a GRU whose hidden state is
//! the fused query representation. The crate holds everything that does not
//! need an operating system:
//!
//! - [`diff`]: a small reverse-mode differentiation graph over dense vectors
//!   and matrices.
//! - [`model`]: the fusion network, its plain inference path and its
//!   differentiable path, plus the mean/max pooling baselines.
//! - [`train`]: triplet and monotonicity losses, schedules, batch
//!   construction with hard negative mining, Adam and the training loop.
//! - [`eval`]: Variable Set and Fixed Set protocol enumeration, gallery
//!   ranking, CMC/mAP scoring and the camera-order experiment.
//! - [`data`]: feature records, indexed datasets and the synthetic
//!   multi-camera generator.
//!
//! File formats, the command line and the operator service live in the
//! `seqfuse` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod math;
pub mod model;
pub mod train;

pub use error::{Error, Result};
