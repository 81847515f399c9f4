//! Network description, whole-network inference and network-level metrics.

mod forward;
mod metrics;
mod mixed;
mod spec;

pub use forward::{
    check_weights, network_forward, network_schedule, network_traffic, stage_shapes, LayerOutput,
    NetworkRun, StageRun,
};
pub use metrics::{miout, op_count, MiouReport, OpMode};
pub use mixed::{mixed_timestep_plan, CutPoint};
pub use spec::{
    ConvStage, LayerKind, LayerSpec, NetworkSpec, StageRole, MAX_INPUT_H, MAX_INPUT_W, MAX_STEPS,
};
