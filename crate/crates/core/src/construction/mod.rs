//! Staged construction: strip schedules, line sets `T_k`, the stage
//! functions `phi_k`, signs `sigma_k`, levels `m_k` and partial sums `h_k`.
//!
//! Line sets are kept as one growing list; `T_k` is a prefix of it. Values
//! are evaluated per point (nearest line of the prefix), which avoids
//! building the full cell complex of every stage.

mod engine;
mod generate;
mod kinks;
mod schedule;
mod validate;

use thiserror::Error;

pub use engine::{theta_for, Construction, DepthClass, HView, PhiEval, PhiView, PointStage, Stage, StagePlan, Trace};
pub use generate::{generate_schedule, GeneratorConfig};
pub use schedule::{eps_level, radical_inverse, Certificate, StageRecord, StageSpec, StripSchedule, Violation};
pub use validate::{certify, validate_schedule, PRECISION_FLOOR};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("stage {stage}: {lines} lines exceed the cap of {cap}")]
    LineCap { stage: usize, lines: usize, cap: usize },
    #[error("only {reached} of {requested} stages are feasible: {reason}")]
    Infeasible {
        reached: usize,
        requested: usize,
        reason: String,
    },
    #[error("requested depth {requested} but the schedule has {available} stages")]
    Depth { requested: usize, available: usize },
}
