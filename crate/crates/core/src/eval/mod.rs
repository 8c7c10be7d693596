//! Evaluation protocols, gallery ranking and retrieval metrics.

mod metrics;
mod plan;
mod protocol;

pub use metrics::{average_precision, cmc, first_correct_rank, rank_gallery, CMC_MAX_RANK};
pub use plan::{fsp_plans, vsp_plans, Protocol, ProtocolPlan};
pub use protocol::{
    evaluate_plan, order_invariance_experiment, random_orders, run_protocol, EvalReport, Fuser,
    OrderReport, PlanResult, QueryOutcome, SizeSummary,
};
