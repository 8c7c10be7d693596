//! Losses, schedules, batch construction, Adam and the training loop.

mod adam;
mod batch;
mod loss;
mod schedule;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batch::{
    build_batch, build_batch_seeded, mine_negative, Batch, BatchItem, CameraOrder, PositiveSource,
};
pub use loss::{
    graph_sequence_loss, hinge_triplet, lambda_r, monotonicity_loss, soft_triplet, total_loss,
    LossParts, LossWeights, TripletKind,
};
pub use schedule::{lambda_schedule, lr_schedule, Schedule};
pub use trainer::{
    batch_loss, batch_loss_and_grad, sequence_loss, sequence_loss_and_grad, train, IterationLog,
    TrainConfig, TrainObserver, TrainOutcome,
};
