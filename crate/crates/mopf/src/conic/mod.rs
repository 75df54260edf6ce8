//! Second-order cone solver: program container, lowering, and an embedded
//! homogeneous interior-point engine.
//!
//! The engine certifies optimality through matching primal and dual
//! objectives: a solution is reported [`SolveStatus::Optimal`] only when the
//! scaled primal/dual residuals are below the feasibility tolerance and the
//! duality gap is below `tol_rel * (1 + |objective|)`. Infeasible programs
//! yield a dual ray.

pub mod ipm;
pub mod program;

pub use program::{ConeBlock, ConeCoord, ConeKind, ConicProgram, LinearRow, ProgramError, StandardForm};

use ipm::{solve_standard_form, IpmSettings, IpmStatus};
use thiserror::Error;

/// Outcome classification of a conic solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

/// Result of a conic solve, reported in the original (unscaled) variable
/// space of the [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal values per program variable.
    pub primal: Vec<f64>,
    /// Primal objective including the program's constant term.
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub solve_time: f64,
    /// Dual ray certifying primal infeasibility, when available.
    pub infeasibility_ray: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Error)]
pub enum ConicError {
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Solver knobs; `tol_rel` bounds the relative duality gap and `tol_feas`
/// the scaled residuals accepted as optimal.
#[derive(Debug, Clone)]
pub struct ConicSettings {
    pub tol_rel: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub verbose: bool,
}

impl Default for ConicSettings {
    fn default() -> Self {
        ConicSettings {
            tol_rel: 1e-8,
            tol_feas: 1e-8,
            max_iter: 150,
            verbose: false,
        }
    }
}

/// Solves a [`ConicProgram`] with default settings.
pub fn solve_conic(program: &ConicProgram) -> Result<ConicSolution, ConicError> {
    solve_conic_with(program, &ConicSettings::default())
}

/// Solves a [`ConicProgram`] with explicit settings.
pub fn solve_conic_with(
    program: &ConicProgram,
    settings: &ConicSettings,
) -> Result<ConicSolution, ConicError> {
    let sf = program.lower()?;
    Ok(solve_lowered(sf, settings))
}

/// Solves an already-lowered standard form (used by the text-format entry
/// point and by tests that construct raw forms).
pub fn solve_lowered(sf: StandardForm, settings: &ConicSettings) -> ConicSolution {
    let ipm_settings = IpmSettings {
        tol_feas: settings.tol_feas,
        tol_rel_gap: settings.tol_rel,
        max_iter: settings.max_iter,
        verbose: settings.verbose,
        ..IpmSettings::default()
    };
    let r = solve_standard_form(sf, &ipm_settings);
    let status = match r.status {
        IpmStatus::Optimal => SolveStatus::Optimal,
        IpmStatus::PrimalInfeasible => SolveStatus::Infeasible,
        IpmStatus::DualInfeasible => SolveStatus::Unbounded,
        IpmStatus::NumericalLimit => SolveStatus::NumericalLimit,
    };
    ConicSolution {
        status,
        primal: r.x,
        objective: r.primal_objective,
        dual_objective: r.dual_objective,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
        rel_gap: r.rel_gap,
        iterations: r.iterations,
        solve_time: r.solve_time,
        infeasibility_ray: r.infeasibility_ray,
    }
}

/// Renders a `name value` dump of the primal solution for regression tests.
pub fn solution_dump(program: &ConicProgram, solution: &ConicSolution) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "status {}\nobjective {:.12e}\n",
        match solution.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalLimit => "numerical-limit",
        },
        solution.objective
    ));
    for (name, v) in program.var_names.iter().zip(solution.primal.iter()) {
        out.push_str(&format!("{name} {v:.12e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc(coords: Vec<ConeCoord>) -> ConeBlock {
        ConeBlock {
            kind: ConeKind::Soc,
            coords,
        }
    }

    fn rotated(coords: Vec<ConeCoord>) -> ConeBlock {
        ConeBlock {
            kind: ConeKind::Rotated,
            coords,
        }
    }

    #[test]
    fn bound_lp() {
        // min x s.t. x >= 3
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", 3.0, f64::INFINITY);
        p.objective[x] = 1.0;
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[x] - 3.0).abs() < 1e-6, "x = {}", sol.primal[x]);
        assert!((sol.objective - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rotated_cone_min() {
        // min x s.t. (x, 1, 1) in rotated cone: 2 x >= 1  ->  x = 0.5
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        p.objective[x] = 1.0;
        p.cones.push(rotated(vec![
            ConeCoord::var(x),
            ConeCoord::constant(1.0),
            ConeCoord::constant(1.0),
        ]));
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[x] - 0.5).abs() < 1e-6, "x = {}", sol.primal[x]);
    }

    #[test]
    fn soc_projection() {
        // min t s.t. t >= ||(x - a)||, x free 2d, a = (0.6, -0.8), and
        // x pinned by equalities to (0, 0): optimum t = 1.
        let mut p = ConicProgram::with_vars(0);
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
        let x1 = p.add_var("x1", 0.0, 0.0);
        let x2 = p.add_var("x2", 0.0, 0.0);
        p.objective[t] = 1.0;
        p.eq_rows.push(
            LinearRow::new().term(x1, 1.0).rhs(0.0), // redundant with bounds, exercises eq path
        );
        p.cones.push(soc(vec![
            ConeCoord::var(t),
            ConeCoord::scaled(x1, 1.0),
            ConeCoord::constant(0.6),
        ]));
        p.cones.push(soc(vec![
            ConeCoord::var(t),
            ConeCoord::scaled(x2, 1.0),
            ConeCoord::constant(-0.8),
        ]));
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[t] - 0.8).abs() < 1e-6, "t = {}", sol.primal[t]);
    }

    #[test]
    fn equality_lp() {
        // min x + 2y s.t. x + y = 1, x, y >= 0 -> x=1, y=0, obj=1
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", 0.0, f64::INFINITY);
        let y = p.add_var("y", 0.0, f64::INFINITY);
        p.objective[x] = 1.0;
        p.objective[y] = 2.0;
        p.eq_rows
            .push(LinearRow::new().term(x, 1.0).term(y, 1.0).rhs(1.0));
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6);
        assert!((sol.primal[x] - 1.0).abs() < 1e-6);
        assert!(sol.primal[y].abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible() {
        // x >= 2 and x <= 1
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", f64::NEG_INFINITY, 1.0);
        p.objective[x] = 1.0;
        p.le_rows.push(LinearRow::new().term(x, -1.0).rhs(-2.0));
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.infeasibility_ray.is_some());
    }

    #[test]
    fn detects_unbounded() {
        // min x, x <= 0, no lower bound
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", f64::NEG_INFINITY, 0.0);
        p.objective[x] = 1.0;
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn weak_duality_on_quadratic_epigraph() {
        // min sum_i (y_i + l_i p_i) s.t. y_i >= q_i p_i^2 (rotated cones),
        // sum p_i = demand, p in boxes. Dual objective must not exceed primal.
        let mut p = ConicProgram::with_vars(0);
        let mut row = LinearRow::new().rhs(3.0);
        for i in 0..3 {
            let pi = p.add_var(format!("p{i}"), 0.0, 2.0);
            let yi = p.add_var(format!("y{i}"), 0.0, f64::INFINITY);
            let q = 0.5 + i as f64;
            let l = 1.0 + 0.3 * i as f64;
            p.objective[yi] = 1.0;
            p.objective[pi] = l;
            p.cones.push(rotated(vec![
                ConeCoord::var(yi),
                ConeCoord::constant(1.0 / (2.0 * q)),
                ConeCoord::var(pi),
            ]));
            row = row.term(pi, 1.0);
        }
        p.eq_rows.push(row);
        let sol = solve_conic(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.dual_objective <= sol.objective + 1e-7);
        assert!(sol.rel_gap < 1e-8);
        // Hand-derived optimum: the cheap unit hits its cap (p0 = 2), the
        // rest equalize marginal costs: 3 p1 + 1.3 = 5 p2 + 1.6, p1 + p2 = 1
        // -> p1 = 0.6625, p2 = 0.3375; objective 6.344375.
        assert!((sol.primal[0] - 2.0).abs() < 1e-4);
        assert!((sol.primal[2] - 0.6625).abs() < 1e-4);
        assert!((sol.primal[4] - 0.3375).abs() < 1e-4);
        assert!((sol.objective - 6.344375).abs() < 1e-6);
    }

    #[test]
    fn text_round_trip_solves_same() {
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", 0.0, f64::INFINITY);
        let y = p.add_var("y", 0.0, f64::INFINITY);
        p.objective[x] = 2.0;
        p.objective[y] = 1.0;
        p.eq_rows
            .push(LinearRow::new().term(x, 1.0).term(y, 1.0).rhs(2.0));
        let direct = solve_conic(&p).unwrap();
        let text = p.export_text().unwrap();
        let sf = StandardForm::parse_text(&text).unwrap();
        let via_text = solve_lowered(sf, &ConicSettings::default());
        assert!((direct.objective - via_text.objective).abs() < 1e-7);
    }
}
