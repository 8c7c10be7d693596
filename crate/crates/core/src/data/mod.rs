//! Feature records, indexed datasets and the synthetic generator.

mod dataset;
mod synthetic;

pub use dataset::{CameraId, Dataset, FeatureRecord, PersonId, RecordIdx, Split};
pub use synthetic::{camera_transforms, generate_synthetic, orthogonality_error, SyntheticSpec};
