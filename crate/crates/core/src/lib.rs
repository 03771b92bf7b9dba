//! Multistage online maxmin allocation with lookahead.
//!
//! Entities are assigned to players step by step under changing restriction
//! lists and values; the objective sums each step's worst-off player total
//! plus a fixed reward for every entity kept in place across consecutive
//! steps. The engine trades those two terms with a threshold rule derived
//! from the plugged solver's approximation factor and the lookahead depth.

pub mod engine;
pub mod gen;
pub mod jsonl;
pub mod model;
pub mod oracle;
pub mod ratio;
pub mod solvers;
pub mod stable;
pub mod sweep;
pub mod verify;

pub use engine::{
    Branch, EngineConfig, EngineError, OnlineEngine, PeriodRecord, PlanSnapshot, PollError,
    RunTrace, compute_c0, run,
};
pub use model::{
    AllocationMap, AssignmentInterval, AssignmentIntervalSet, EntityId, Horizon, Instance,
    ModelError, Objective, PlayerId, TimeStep, Value, lambda_intervals, lambda_pairwise, nu_step,
    nu_sum, total_objective,
};
pub use ratio::{RatioError, Rho, ThresholdWeight};
pub use solvers::{ExactSolver, GreedySolver, Solver, SolverError, solver_by_name};
pub use stable::{
    AvailabilityIndex, AvailabilityRun, StableState, build_index, stable_allocate, stable_entity,
};
