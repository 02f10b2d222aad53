//! Code planning, C source emission and estimation reports for a DNN model.
//!
//! [`plan`] lays out instance functions, the per-segment tile-loop call
//! schedule, on-chip tile and weight buffers and off-chip feature maps.
//! [`emit`] renders the plan as portable HLS-style C with pragma comments.

mod emit;
mod plan;
mod report;

pub use emit::{describe, emit, top_call_count, Manifest, SourceTree};
pub use plan::{
    plan, BufferDecl, BufferLocation, CodegenPlan, FusedLayer, InstanceDecl, LayerCall, PlanOptions, SegmentPlan, WeightLoad,
};
pub use report::{estimate_report, utilization_pct, EstimateReport};
