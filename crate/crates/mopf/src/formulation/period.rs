//! Single-period polar subproblem with a fixed charging schedule.
//!
//! Variables: `[V (n_bus), theta (n_bus), p_g (n_gen), q_g (n_gen)]`.
//! Equalities: active/reactive balance per bus plus the reference-angle
//! gauge. Inequalities: thermal limits per line end and the symmetric
//! angle-difference limits. Exact first and second derivatives throughout;
//! every directed flow is an instance of
//!
//! ```text
//!   F = alpha V_d^2 + Vi Vj (kc cos t + ks sin t),   t = theta_i - theta_j
//! ```
//!
//! so one helper covers values, gradients, and Hessians of all four flows.

use super::instance::MopfInstance;
use crate::case::CostPolynomial;
use crate::nlp::NlpModel;

/// Coefficients of one directed flow expression.
#[derive(Debug, Clone, Copy)]
struct FlowExpr {
    /// Quadratic self term `alpha * V_d^2` sits on the `from` (true) or
    /// `to` (false) endpoint voltage.
    self_on_from: bool,
    alpha: f64,
    kc: f64,
    ks: f64,
}

#[derive(Debug, Clone)]
struct LineData {
    from: usize,
    to: usize,
    s_max: f64,
    angle_max: f64,
    /// p_from, q_from, p_to, q_to.
    flows: [FlowExpr; 4],
}

/// The per-period nonlinear subproblem; implements [`NlpModel`].
#[derive(Debug, Clone)]
pub struct PeriodNlp {
    n_bus: usize,
    n_gen: usize,
    v_min: Vec<f64>,
    v_max: Vec<f64>,
    shunt_g: Vec<f64>,
    shunt_b: Vec<f64>,
    gen_bus: Vec<usize>,
    gen_p_bounds: Vec<(f64, f64)>,
    gen_q_bounds: Vec<(f64, f64)>,
    costs: Vec<CostPolynomial>,
    lines: Vec<LineData>,
    capped_lines: Vec<usize>,
    /// Effective real load including the fixed charging schedule.
    p_load: Vec<f64>,
    q_load: Vec<f64>,
    reference_bus: usize,
}

/// Builds the period-`t` subproblem with the charging and feed-in powers
/// fixed to `charge[site]` and `discharge[site]` (per-unit). The fixed
/// schedule enters the active balance as a constant net load shift.
pub fn build_period_nlp(
    instance: &MopfInstance,
    t: usize,
    charge: &[f64],
    discharge: &[f64],
) -> PeriodNlp {
    let net = &instance.network;
    assert_eq!(charge.len(), instance.sites.len());
    assert_eq!(discharge.len(), instance.sites.len());

    let mut p_load: Vec<f64> = (0..net.buses.len())
        .map(|b| instance.loads.p[b][t])
        .collect();
    let q_load: Vec<f64> = (0..net.buses.len())
        .map(|b| instance.loads.q[b][t])
        .collect();
    for (s, site) in instance.sites.iter().enumerate() {
        p_load[site.bus] += charge[s] - site.efficiency * discharge[s];
    }

    let lines: Vec<LineData> = net
        .lines
        .iter()
        .map(|line| {
            let a = &line.admittance;
            LineData {
                from: line.from,
                to: line.to,
                s_max: line.s_max,
                angle_max: line.angle_max,
                flows: [
                    // p_from = gff Vi^2 + Vi Vj (-G cos - B sin)
                    FlowExpr {
                        self_on_from: true,
                        alpha: a.g_ff,
                        kc: -a.g_from,
                        ks: -a.b_from,
                    },
                    // q_from = -bff Vi^2 + Vi Vj (B cos - G sin)
                    FlowExpr {
                        self_on_from: true,
                        alpha: -a.b_ff,
                        kc: a.b_from,
                        ks: -a.g_from,
                    },
                    // p_to = gtt Vj^2 + Vi Vj (-G' cos + B' sin)
                    FlowExpr {
                        self_on_from: false,
                        alpha: a.g_tt,
                        kc: -a.g_to,
                        ks: a.b_to,
                    },
                    // q_to = -btt Vj^2 + Vi Vj (B' cos + G' sin)
                    FlowExpr {
                        self_on_from: false,
                        alpha: -a.b_tt,
                        kc: a.b_to,
                        ks: a.g_to,
                    },
                ],
            }
        })
        .collect();
    let capped_lines = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.s_max.is_finite())
        .map(|(i, _)| i)
        .collect();

    PeriodNlp {
        n_bus: net.buses.len(),
        n_gen: net.generators.len(),
        v_min: net.buses.iter().map(|b| b.v_min).collect(),
        v_max: net.buses.iter().map(|b| b.v_max).collect(),
        shunt_g: net.buses.iter().map(|b| b.shunt_g).collect(),
        shunt_b: net.buses.iter().map(|b| b.shunt_b).collect(),
        gen_bus: net.generators.iter().map(|g| g.bus).collect(),
        gen_p_bounds: net.generators.iter().map(|g| (g.p_min, g.p_max)).collect(),
        gen_q_bounds: net.generators.iter().map(|g| (g.q_min, g.q_max)).collect(),
        costs: net.generators.iter().map(|g| g.cost).collect(),
        lines,
        capped_lines,
        p_load,
        q_load,
        reference_bus: 0,
    }
}

/// Flow evaluation bundle for one line at a point.
struct FlowEval {
    value: f64,
    /// d/dVi, d/dVj, d/dti, d/dtj.
    grad: [f64; 4],
    /// Upper-triangle Hessian over (Vi, Vj, ti, tj):
    /// [ViVi, ViVj, Viti, Vitj, VjVj, Vjti, Vjtj, titi, titj, tjtj].
    hess: [f64; 10],
}

impl FlowExpr {
    fn eval(&self, vi: f64, vj: f64, cos_t: f64, sin_t: f64) -> FlowEval {
        let tval = self.kc * cos_t + self.ks * sin_t;
        let tder = -self.kc * sin_t + self.ks * cos_t;
        let (a_i, a_j) = if self.self_on_from {
            (self.alpha, 0.0)
        } else {
            (0.0, self.alpha)
        };
        FlowEval {
            value: a_i * vi * vi + a_j * vj * vj + vi * vj * tval,
            grad: [
                2.0 * a_i * vi + vj * tval,
                2.0 * a_j * vj + vi * tval,
                vi * vj * tder,
                -vi * vj * tder,
            ],
            hess: [
                2.0 * a_i,      // Vi Vi
                tval,           // Vi Vj
                vj * tder,      // Vi ti
                -vj * tder,     // Vi tj
                2.0 * a_j,      // Vj Vj
                vi * tder,      // Vj ti
                -vi * tder,     // Vj tj
                -vi * vj * tval, // ti ti
                vi * vj * tval,  // ti tj
                -vi * vj * tval, // tj tj
            ],
        }
    }
}

impl PeriodNlp {
    pub fn num_buses(&self) -> usize {
        self.n_bus
    }
    pub fn num_gens(&self) -> usize {
        self.n_gen
    }
    fn v_var(&self, b: usize) -> usize {
        b
    }
    fn th_var(&self, b: usize) -> usize {
        self.n_bus + b
    }
    fn pg_var(&self, g: usize) -> usize {
        2 * self.n_bus + g
    }
    fn qg_var(&self, g: usize) -> usize {
        2 * self.n_bus + self.n_gen + g
    }

    /// A flat start: unit voltages, zero angles, midpoint generation.
    pub fn flat_start(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        for b in 0..self.n_bus {
            x[self.v_var(b)] = 0.5 * (self.v_min[b] + self.v_max[b]);
        }
        for g in 0..self.n_gen {
            let (lo, hi) = self.gen_p_bounds[g];
            x[self.pg_var(g)] = 0.5 * (lo + hi.min(lo + 2.0));
            let (qlo, qhi) = self.gen_q_bounds[g];
            x[self.qg_var(g)] = 0.5 * (qlo + qhi);
        }
        x
    }

    /// Packs a `(V, theta, p_g, q_g)` point into the variable vector.
    pub fn pack(&self, v: &[f64], theta: &[f64], p_g: &[f64], q_g: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        x[..self.n_bus].copy_from_slice(v);
        x[self.n_bus..2 * self.n_bus].copy_from_slice(theta);
        for g in 0..self.n_gen {
            x[self.pg_var(g)] = p_g[g];
            x[self.qg_var(g)] = q_g[g];
        }
        x
    }

    pub fn unpack<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        (
            &x[..self.n_bus],
            &x[self.n_bus..2 * self.n_bus],
            &x[2 * self.n_bus..2 * self.n_bus + self.n_gen],
            &x[2 * self.n_bus + self.n_gen..],
        )
    }

    /// Largest violation across balance rows, bounds, thermal and angle
    /// limits at a point; the feasibility measure quoted in results.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut c_eq = vec![0.0; self.num_eq()];
        self.eq_constraints(x, &mut c_eq);
        let mut c_in = vec![0.0; self.num_ineq()];
        self.ineq_constraints(x, &mut c_in);
        let mut worst = c_eq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &c_in {
            worst = worst.max((-v).max(0.0));
        }
        let (lo, hi) = self.bounds();
        for i in 0..x.len() {
            worst = worst.max(lo[i] - x[i]).max(x[i] - hi[i]);
        }
        worst
    }
}

impl NlpModel for PeriodNlp {
    fn num_vars(&self) -> usize {
        2 * self.n_bus + 2 * self.n_gen
    }
    fn num_eq(&self) -> usize {
        2 * self.n_bus + 1
    }
    fn num_ineq(&self) -> usize {
        2 * self.capped_lines.len() + 2 * self.lines.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_vars();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for b in 0..self.n_bus {
            lo[self.v_var(b)] = self.v_min[b];
            hi[self.v_var(b)] = self.v_max[b];
        }
        for g in 0..self.n_gen {
            lo[self.pg_var(g)] = self.gen_p_bounds[g].0;
            hi[self.pg_var(g)] = self.gen_p_bounds[g].1;
            lo[self.qg_var(g)] = self.gen_q_bounds[g].0;
            hi[self.qg_var(g)] = self.gen_q_bounds[g].1;
        }
        (lo, hi)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (0..self.n_gen)
            .map(|g| self.costs[g].eval(x[self.pg_var(g)]))
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        for g in 0..self.n_gen {
            grad[self.pg_var(g)] = self.costs[g].derivative(x[self.pg_var(g)]);
        }
    }

    fn eq_constraints(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for b in 0..self.n_bus {
            let v = x[self.v_var(b)];
            out[2 * b] = -self.p_load[b] - self.shunt_g[b] * v * v;
            out[2 * b + 1] = -self.q_load[b] + self.shunt_b[b] * v * v;
        }
        for g in 0..self.n_gen {
            out[2 * self.gen_bus[g]] += x[self.pg_var(g)];
            out[2 * self.gen_bus[g] + 1] += x[self.qg_var(g)];
        }
        for line in &self.lines {
            let (vi, vj) = (x[self.v_var(line.from)], x[self.v_var(line.to)]);
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            let (ct, st) = (t.cos(), t.sin());
            let flows: Vec<f64> = line
                .flows
                .iter()
                .map(|f| f.eval(vi, vj, ct, st).value)
                .collect();
            out[2 * line.from] -= flows[0];
            out[2 * line.from + 1] -= flows[1];
            out[2 * line.to] -= flows[2];
            out[2 * line.to + 1] -= flows[3];
        }
        out[2 * self.n_bus] = x[self.th_var(self.reference_bus)];
    }

    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for &li in &self.capped_lines {
            let line = &self.lines[li];
            let (vi, vj) = (x[self.v_var(line.from)], x[self.v_var(line.to)]);
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            let (ct, st) = (t.cos(), t.sin());
            let s2 = line.s_max * line.s_max;
            let pf = line.flows[0].eval(vi, vj, ct, st).value;
            let qf = line.flows[1].eval(vi, vj, ct, st).value;
            let pt = line.flows[2].eval(vi, vj, ct, st).value;
            let qt = line.flows[3].eval(vi, vj, ct, st).value;
            out[k] = s2 - pf * pf - qf * qf;
            out[k + 1] = s2 - pt * pt - qt * qt;
            k += 2;
        }
        for line in &self.lines {
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            out[k] = line.angle_max - t;
            out[k + 1] = line.angle_max + t;
            k += 2;
        }
    }

    fn eq_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.num_vars();
        out.fill(0.0);
        for b in 0..self.n_bus {
            let v = x[self.v_var(b)];
            out[(2 * b) * n + self.v_var(b)] = -2.0 * self.shunt_g[b] * v;
            out[(2 * b + 1) * n + self.v_var(b)] = 2.0 * self.shunt_b[b] * v;
        }
        for g in 0..self.n_gen {
            out[(2 * self.gen_bus[g]) * n + self.pg_var(g)] = 1.0;
            out[(2 * self.gen_bus[g] + 1) * n + self.qg_var(g)] = 1.0;
        }
        for line in &self.lines {
            let (vi, vj) = (x[self.v_var(line.from)], x[self.v_var(line.to)]);
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            let (ct, st) = (t.cos(), t.sin());
            let vars = [
                self.v_var(line.from),
                self.v_var(line.to),
                self.th_var(line.from),
                self.th_var(line.to),
            ];
            let rows = [
                2 * line.from,
                2 * line.from + 1,
                2 * line.to,
                2 * line.to + 1,
            ];
            for (fi, flow) in line.flows.iter().enumerate() {
                let e = flow.eval(vi, vj, ct, st);
                for (k, &var) in vars.iter().enumerate() {
                    out[rows[fi] * n + var] -= e.grad[k];
                }
            }
        }
        out[(2 * self.n_bus) * n + self.th_var(self.reference_bus)] = 1.0;
    }

    fn ineq_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.num_vars();
        out.fill(0.0);
        let mut k = 0;
        for &li in &self.capped_lines {
            let line = &self.lines[li];
            let (vi, vj) = (x[self.v_var(line.from)], x[self.v_var(line.to)]);
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            let (ct, st) = (t.cos(), t.sin());
            let vars = [
                self.v_var(line.from),
                self.v_var(line.to),
                self.th_var(line.from),
                self.th_var(line.to),
            ];
            for (row_off, pair) in [(0usize, [0usize, 1]), (1, [2, 3])] {
                let a = line.flows[pair[0]].eval(vi, vj, ct, st);
                let b = line.flows[pair[1]].eval(vi, vj, ct, st);
                for (kk, &var) in vars.iter().enumerate() {
                    out[(k + row_off) * n + var] =
                        -2.0 * a.value * a.grad[kk] - 2.0 * b.value * b.grad[kk];
                }
            }
            k += 2;
        }
        for line in &self.lines {
            out[k * n + self.th_var(line.from)] = -1.0;
            out[k * n + self.th_var(line.to)] = 1.0;
            out[(k + 1) * n + self.th_var(line.from)] = 1.0;
            out[(k + 1) * n + self.th_var(line.to)] = -1.0;
            k += 2;
        }
    }

    fn lagrangian_hessian(&self, x: &[f64], sigma: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
        let n = self.num_vars();
        out.fill(0.0);
        for g in 0..self.n_gen {
            out[self.pg_var(g) * n + self.pg_var(g)] = 2.0 * sigma * self.costs[g].c2;
        }
        // Shunt curvature from the balance rows (weight -y).
        for b in 0..self.n_bus {
            let w = -y[2 * b] * (-2.0 * self.shunt_g[b]) - y[2 * b + 1] * (2.0 * self.shunt_b[b]);
            out[self.v_var(b) * n + self.v_var(b)] += w;
        }

        let add_sym = |out: &mut [f64], a: usize, b: usize, v: f64| {
            out[a * n + b] += v;
            if a != b {
                out[b * n + a] += v;
            }
        };

        // Flow curvature: balance rows contribute -y * (-F) = +y * hess(F);
        // thermal rows contribute -z * hess(s2 - pf^2 - ...) .
        let mut cap_row_of_line = vec![None; self.lines.len()];
        for (pos, &li) in self.capped_lines.iter().enumerate() {
            cap_row_of_line[li] = Some(2 * pos);
        }

        for (li, line) in self.lines.iter().enumerate() {
            let (vi, vj) = (x[self.v_var(line.from)], x[self.v_var(line.to)]);
            let t = x[self.th_var(line.from)] - x[self.th_var(line.to)];
            let (ct, st) = (t.cos(), t.sin());
            let vars = [
                self.v_var(line.from),
                self.v_var(line.to),
                self.th_var(line.from),
                self.th_var(line.to),
            ];
            let pairs: [(usize, usize); 10] = [
                (0, 0),
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 1),
                (1, 2),
                (1, 3),
                (2, 2),
                (2, 3),
                (3, 3),
            ];
            let evals: Vec<FlowEval> = line.flows.iter().map(|f| f.eval(vi, vj, ct, st)).collect();
            let balance_rows = [
                2 * line.from,
                2 * line.from + 1,
                2 * line.to,
                2 * line.to + 1,
            ];
            for (fi, e) in evals.iter().enumerate() {
                // Balance row `balance_rows[fi]` holds `... - F`, so the
                // Lagrangian term is -y * (-F) = y * F.
                let w = y[balance_rows[fi]];
                if w != 0.0 {
                    for (k, &(a, b)) in pairs.iter().enumerate() {
                        if e.hess[k] != 0.0 {
                            add_sym(out, vars[a], vars[b], w * e.hess[k]);
                        }
                    }
                }
            }
            if let Some(row0) = cap_row_of_line[li] {
                for (row_off, pair) in [(0usize, [0usize, 1]), (1, [2, 3])] {
                    let zw = z[row0 + row_off];
                    if zw == 0.0 {
                        continue;
                    }
                    for &f in &pair {
                        let e = &evals[f];
                        // -z * hess(-F^2) = z * (2 grad grad' + 2 F hess)
                        for (k, &(a, b)) in pairs.iter().enumerate() {
                            let h2 = 2.0 * (e.grad[a] * e.grad[b] + e.value * e.hess[k]);
                            if h2 != 0.0 {
                                add_sym(out, vars[a], vars[b], zw * h2);
                            }
                        }
                    }
                }
            }
        }
    }
}
