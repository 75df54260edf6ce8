//! Multi-period AC optimal power flow with aggregated fleet charging.
//!
//! The crate builds the 24-period optimal power flow problem for a power
//! network whose load buses each host an aggregated group of electric
//! vehicles, solves a second-order cone relaxation of it for certified lower
//! bounds, recovers feasible schedules through per-period local solves, and
//! sweeps an emission cap between its attainable extremes to trace the
//! cost-emission trade-off frontier.

pub mod acopf;
#[cfg(doctest)]
mod book;
pub mod case;
pub mod conic;
pub mod fleet;
pub mod formulation;
pub mod linalg;
pub mod nlp;
pub mod pareto;
pub mod timeseries;

pub use conic::{solve_conic, solve_conic_with, ConicProgram, ConicSolution, SolveStatus};
pub use pareto::{baseline_generation, emission_bounds, lower_bound_with_cap, sweep};
