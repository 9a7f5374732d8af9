//! Local-consistency instances, residual checks, rank bounds and the
//! feasibility solver.

mod instance;
mod map;
mod solver;

pub use instance::{
    barvinok_bound, check_consistency, dimension_bound, theorem1_bound, ConsistencyInstance,
    MarginalConstraint,
};
pub use map::{
    isqrt, ConstraintSystem, LinearConstraint, MarginalMap, ResidualReport, TARGET_TRACE_TOL,
};
pub use solver::{
    find_feasible, find_feasible_system, FeasibilityOptions, FeasibleSolution,
    InfeasibilityReport,
};
pub(crate) use map::check_density;
