//! Preemptive coordination of independent entities through shared intentions,
//! and its use for conflict-free on-ramp merging.
//!
//! Entities announce future tasks (claims on a spatial resource over a tick
//! interval) well before executing them. A manager per spatial domain resolves
//! conflicts by delaying tasks and returns the approved plan. The [`traffic`]
//! module applies this to a two-lane merge, and [`harness`] runs and compares
//! it against a car-following baseline.
//!
//! Run `cargo run --example <name>` from `crates/core` for a tour; see the
//! README for the list.

pub mod coordination;
pub mod harness;
pub mod spatial;
pub mod temporal;
pub mod traffic;

pub use coordination::{
    alter, entity_find_action, entity_submit, freeze_check, is_conflicting, modify_task,
    try_approve, ApprovalOutcome, ApprovedSchedule, Entity, EntityId, Intention, Manager,
    ManagerId, Rejection, Task,
};
pub use spatial::{
    discretize_claim, locate_manager, Jurisdiction, LaneId, Layout, ResourceId, SpatialDomain,
};
pub use temporal::{
    classify_zone, deadlines_for, is_submittable, PlanningDeadlines, TemporalConfig, Tick, Zone,
};
