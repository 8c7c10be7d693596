//! File formats, command line and operator service around `seqfuse-core`.
//!
//! - [`manifest`]: line-delimited feature manifests with an optional f32
//!   sidecar.
//! - [`checkpoint`]: JSON header plus little-endian f32 parameter blob.
//! - [`report`]: evaluation report documents, text tables and loss logs.
//! - [`service`]: the session engine and its HTTP API.
//! - [`cli`]: the `seqfuse` command.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod report;
pub mod service;

pub use error::{Error, Result};
