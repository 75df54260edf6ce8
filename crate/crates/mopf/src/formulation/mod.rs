//! The multi-period optimization instance and its two mathematical faces:
//! a second-order cone relaxation over squared-voltage variables, and
//! per-period polar subproblems with fixed charging schedules.
//!
//! # Lifted variables
//!
//! The relaxation replaces voltage phasors by, per period,
//!
//! ```text
//!   c_ii = Vi^2
//!   c_ij = Vi Vj cos(theta_i - theta_j)     (one per line)
//!   s_ij = -Vi Vj sin(theta_i - theta_j)
//! ```
//!
//! which makes every network row linear. The trigonometric identity
//! `c_ij^2 + s_ij^2 = c_ii c_jj` is relaxed to `<=`, a rotated cone. Angles
//! disappear entirely, so the per-line angle limit only survives through
//! interval bounds on `c_ij` and `s_ij` and is enforced exactly in the
//! per-period subproblems.

mod instance;
mod period;
mod residuals;
mod socp;

pub use instance::{
    assemble_instance, ChargeSite, FormulationError, InstanceOptions, MopfInstance, ObjectiveKind,
};
pub use period::{build_period_nlp, PeriodNlp};
pub use residuals::{consistency_residuals, lift_period_point, ResidualReport};
pub use socp::{build_socp, VariableIndex};
