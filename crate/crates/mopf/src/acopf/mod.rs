//! Feasible-point recovery: warm starts from relaxation solutions, local
//! per-period solves, and the uncoordinated midnight-charging schedule.

mod benchmark;
mod warm;

pub use benchmark::{benchmark_charging, BenchmarkError, ChargeSchedule};
pub use warm::{warm_start_from_socp, WarmStart};

use crate::formulation::{build_period_nlp, MopfInstance, PeriodNlp};
use crate::nlp::{solve_nlp, NlpFailure, NlpSettings};
use thiserror::Error;

/// A locally optimal, feasible single-period operating point.
#[derive(Debug, Clone)]
pub struct PeriodSolution {
    pub period: usize,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// Per line: (p_from, q_from, p_to, q_to).
    pub flows: Vec<(f64, f64, f64, f64)>,
    pub objective: f64,
    pub max_violation: f64,
}

#[derive(Debug, Error)]
pub enum PeriodSolveError {
    #[error("period {period}: {source}")]
    Solver {
        period: usize,
        source: NlpFailure,
    },
    #[error("period {period}: solution violates constraints by {violation:.3e}")]
    Violation { period: usize, violation: f64 },
}

/// Residual ceiling accepted for a recovered point, per-unit.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Solves one period subproblem from a starting point.
pub fn solve_local(
    model: &PeriodNlp,
    period: usize,
    start: &[f64],
    settings: &NlpSettings,
) -> Result<PeriodSolution, PeriodSolveError> {
    let sol = solve_nlp(model, start, settings)
        .map_err(|source| PeriodSolveError::Solver { period, source })?;
    let violation = model.max_violation(&sol.x);
    if violation > FEASIBILITY_TOL {
        return Err(PeriodSolveError::Violation { period, violation });
    }
    let (v, theta, p_gen, q_gen) = model.unpack(&sol.x);
    Ok(PeriodSolution {
        period,
        v: v.to_vec(),
        theta: theta.to_vec(),
        p_gen: p_gen.to_vec(),
        q_gen: q_gen.to_vec(),
        flows: Vec::new(),
        objective: sol.objective,
        max_violation: violation,
    })
}

/// Builds and solves the period-`t` subproblem with the supplied fixed
/// schedule, trying the warm start first and falling back to a flat start.
pub fn solve_period(
    instance: &MopfInstance,
    t: usize,
    charge: &[f64],
    discharge: &[f64],
    warm: Option<&WarmStart>,
    settings: &NlpSettings,
) -> Result<PeriodSolution, PeriodSolveError> {
    let model = build_period_nlp(instance, t, charge, discharge);
    let flows_of = |sol: &mut PeriodSolution| {
        sol.flows = instance
            .network
            .lines
            .iter()
            .map(|line| {
                let d = sol.theta[line.from] - sol.theta[line.to];
                let (pf, qf) = line.flow_from(sol.v[line.from], sol.v[line.to], d);
                let (pt, qt) = line.flow_to(sol.v[line.from], sol.v[line.to], d);
                (pf, qf, pt, qt)
            })
            .collect();
    };
    if let Some(w) = warm {
        let start = model.pack(&w.v, &w.theta, &w.p_gen, &w.q_gen);
        match solve_local(&model, t, &start, settings) {
            Ok(mut sol) => {
                flows_of(&mut sol);
                return Ok(sol);
            }
            Err(_) => { /* fall through to flat start */ }
        }
    }
    let mut sol = solve_local(&model, t, &model.flat_start(), settings)?;
    flows_of(&mut sol);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::conic::{solve_conic, SolveStatus};
    use crate::formulation::{assemble_instance, build_socp, InstanceOptions, VariableIndex};
    use crate::timeseries::{scale_loads, SeasonProfile};

    fn instance(case: &str, horizon: usize) -> MopfInstance {
        let network = parse_case(case).unwrap();
        let shape = SeasonProfile {
            label: "flat".into(),
            values: vec![1.0; horizon],
        };
        let loads = scale_loads(&network, &shape);
        assemble_instance(&network, &loads, &[], None, InstanceOptions::default()).unwrap()
    }

    #[test]
    fn single_bus_period_matches_closed_form() {
        // Cost rises with p, so the optimum sits at V = vmin:
        // p* = load + gsh vmin^2, objective = cost(p*).
        let inst = instance(include_str!("../../tests/fixtures/case1.m"), 1);
        let sol = solve_period(&inst, 0, &[], &[], None, &crate::nlp::NlpSettings::default())
            .expect("solvable");
        let gsh = inst.network.buses[0].shunt_g;
        let p_expect = inst.network.buses[0].load_p + gsh * 0.95 * 0.95;
        assert!(
            (sol.p_gen[0] - p_expect).abs() < 1e-7,
            "p = {}, expect {}",
            sol.p_gen[0],
            p_expect
        );
        let cost = inst.network.generators[0].cost.eval(p_expect);
        assert!((sol.objective - cost).abs() < 1e-6);
        assert!(sol.max_violation < 1e-8);
    }

    #[test]
    fn two_bus_period_upper_bounds_the_relaxation() {
        let inst = instance(include_str!("../../tests/fixtures/case2.m"), 1);
        let program = build_socp(&inst).unwrap();
        let relax = solve_conic(&program).unwrap();
        assert_eq!(relax.status, SolveStatus::Optimal);
        let idx = VariableIndex::new(&inst);
        let warm = warm_start_from_socp(&inst, &idx, &relax.primal, 0);
        let sol = solve_period(
            &inst,
            0,
            &[],
            &[],
            Some(&warm),
            &crate::nlp::NlpSettings::default(),
        )
        .expect("solvable");
        assert!(sol.max_violation < FEASIBILITY_TOL);
        // Lower bound property, and on this radial case near-tightness.
        assert!(sol.objective >= relax.objective - 1e-6 * relax.objective.abs());
        let gap = (sol.objective - relax.objective) / sol.objective.abs();
        assert!(gap < 1e-4, "gap {gap}, ub {} lb {}", sol.objective, relax.objective);
    }

    #[test]
    fn meshed_five_bus_period_solves_from_socp_warm_start() {
        let inst = instance(include_str!("../../tests/fixtures/case5.m"), 1);
        let program = build_socp(&inst).unwrap();
        let relax = solve_conic(&program).unwrap();
        assert_eq!(relax.status, SolveStatus::Optimal);
        let idx = VariableIndex::new(&inst);
        let warm = warm_start_from_socp(&inst, &idx, &relax.primal, 0);
        let sol = solve_period(
            &inst,
            0,
            &[],
            &[],
            Some(&warm),
            &crate::nlp::NlpSettings::default(),
        )
        .expect("solvable");
        assert!(sol.max_violation < FEASIBILITY_TOL);
        assert!(sol.objective >= relax.objective - 1e-6 * relax.objective.abs());
        let gap = 100.0 * (1.0 - relax.objective / sol.objective);
        assert!(gap < 1.0, "gap {gap}%");
    }

    #[test]
    fn infeasible_period_reports_failure() {
        // Load far above generation capacity.
        let text = include_str!("../../tests/fixtures/case2.m")
            .replace("2	1	40	10", "2	1	400	100");
        let inst = instance(&text, 1);
        let r = solve_period(&inst, 0, &[], &[], None, &crate::nlp::NlpSettings::default());
        assert!(r.is_err());
    }
}
