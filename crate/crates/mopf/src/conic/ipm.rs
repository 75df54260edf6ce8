//! Homogeneous self-dual interior-point method for second-order cone
//! programs, with Nesterov-Todd scaling and a Mehrotra predictor-corrector.
//!
//! Works on the standard form produced by lowering:
//!
//! ```text
//!   minimize    c'x
//!   subject to  A x = b
//!               G x + s = h,   s in K = R+^l x Q_1 x ... x Q_N
//! ```
//!
//! The embedding introduces (tau, kappa); tau -> positive yields an optimal
//! pair, kappa -> positive yields an infeasibility certificate. Each
//! iteration factors the quasi-definite KKT matrix
//!
//! ```text
//!   [ dI    A'      G'    ]
//!   [ A    -dI      0     ]
//!   [ G     0   -W^2 - dI ]
//! ```
//!
//! once and reuses it for the predictor and corrector solves. Solutions are
//! refined against the unregularized operator.

use super::program::StandardForm;
use crate::linalg::{reverse_cuthill_mckee, CscMatrix, LdlFactor, LdlSymbolic};
use std::time::Instant;

/// Relative residual below which a homogeneous ray counts as an
/// infeasibility certificate.
const INFEAS_CERT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub tol_feas: f64,
    pub tol_rel_gap: f64,
    pub max_iter: usize,
    pub static_reg: f64,
    pub refine_steps: usize,
    pub ruiz_iters: usize,
    pub verbose: bool,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            tol_feas: 1e-8,
            tol_rel_gap: 1e-8,
            max_iter: 150,
            static_reg: 1e-8,
            refine_steps: 3,
            ruiz_iters: 6,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// c'x + constant at the returned primal point.
    pub primal_objective: f64,
    /// -b'y - h'z + constant.
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub solve_time: f64,
    /// Scaled infeasibility certificate (y, z) when primal infeasible.
    pub infeasibility_ray: Option<(Vec<f64>, Vec<f64>)>,
}

/// Cone layout over the `h`-dimensional slack space.
#[derive(Debug, Clone)]
struct ConeLayout {
    nonneg: usize,
    socs: Vec<(usize, usize)>, // (offset, dim)
    dim: usize,
}

impl ConeLayout {
    fn new(nonneg: usize, soc_dims: &[usize]) -> Self {
        let mut socs = Vec::with_capacity(soc_dims.len());
        let mut off = nonneg;
        for &d in soc_dims {
            socs.push((off, d));
            off += d;
        }
        ConeLayout {
            nonneg,
            socs,
            dim: off,
        }
    }

    fn degree(&self) -> usize {
        self.nonneg + self.socs.len()
    }

    /// Unit element of the cone product.
    fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for v in e.iter_mut().take(self.nonneg) {
            *v = 1.0;
        }
        for &(off, _) in &self.socs {
            e[off] = 1.0;
        }
        e
    }

    /// Pushes `v` strictly inside the cone with unit margin (initialization
    /// only; inside the iteration use [`ConeLayout::repair_roundoff`]).
    fn bring_to_interior(&self, v: &mut [f64]) {
        for i in 0..self.nonneg {
            if v[i] < 1e-4 {
                v[i] = 1.0;
            }
        }
        for &(off, d) in &self.socs {
            let head = v[off];
            let tail_norm = norm2(&v[off + 1..off + d]);
            if head - tail_norm < 1e-4 {
                v[off] = tail_norm + 1.0;
            }
        }
    }

    /// Repairs roundoff-level cone violations without disturbing the
    /// iterate: coordinates are nudged by a relative epsilon only.
    fn repair_roundoff(&self, v: &mut [f64]) {
        for i in 0..self.nonneg {
            if v[i] <= 0.0 {
                v[i] = 1e-300_f64.max(v[i].abs() * 1e-3);
            }
        }
        for &(off, d) in &self.socs {
            let tail_norm = norm2(&v[off + 1..off + d]);
            let floor = tail_norm * (1.0 + 1e-12) + 1e-300;
            if v[off] <= floor {
                v[off] = floor + (v[off].abs() + tail_norm) * 1e-14;
            }
        }
    }

    /// Largest step to the cone boundary from interior `u` along `du`.
    fn step_to_boundary(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        for &(off, d) in &self.socs {
            let u0 = u[off];
            let du0 = du[off];
            let u1 = &u[off + 1..off + d];
            let du1 = &du[off + 1..off + d];
            // J(u + a du) = 0 with J(v) = v0^2 - |v1|^2
            let a = du0 * du0 - dot(du1, du1);
            let b = 2.0 * (u0 * du0 - dot(u1, du1));
            let c = (u0 * u0 - dot(u1, u1)).max(0.0);
            let mut best = f64::INFINITY;
            if a.abs() < 1e-300 {
                if b < 0.0 {
                    best = -c / b;
                }
            } else {
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for r in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                        if r > 0.0 {
                            best = best.min(r);
                        }
                    }
                } else if a < 0.0 {
                    // Shouldn't happen with c >= 0, kept for safety.
                    best = 0.0;
                }
            }
            // Head must also stay nonnegative.
            if du0 < 0.0 {
                best = best.min(-u0 / du0);
            }
            alpha = alpha.min(best);
        }
        alpha
    }

    /// Jordan product w = u o v.
    fn product(&self, u: &[f64], v: &[f64], w: &mut [f64]) {
        for i in 0..self.nonneg {
            w[i] = u[i] * v[i];
        }
        for &(off, d) in &self.socs {
            let mut head = 0.0;
            for k in 0..d {
                head += u[off + k] * v[off + k];
            }
            for k in 1..d {
                w[off + k] = u[off] * v[off + k] + v[off] * u[off + k];
            }
            w[off] = head;
        }
    }

    /// Jordan division d = lambda \ w (solves lambda o d = w).
    fn divide(&self, lambda: &[f64], w: &[f64], d_out: &mut [f64]) {
        for i in 0..self.nonneg {
            d_out[i] = w[i] / lambda[i];
        }
        for &(off, d) in &self.socs {
            let l0 = lambda[off];
            let l1 = &lambda[off + 1..off + d];
            let w0 = w[off];
            let w1 = &w[off + 1..off + d];
            let det = l0 * l0 - dot(l1, l1);
            let d0 = (l0 * w0 - dot(l1, w1)) / det;
            for k in 1..d {
                d_out[off + k] = (w1[k - 1] - d0 * lambda[off + k]) / l0;
            }
            d_out[off] = d0;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Nesterov-Todd scaling state for the cone product.
struct NtScaling {
    /// Nonneg block: w_i = sqrt(s_i / z_i).
    w_nonneg: Vec<f64>,
    /// Per SOC: (eta, wbar) with J(wbar) = 1.
    socs: Vec<(f64, Vec<f64>)>,
    /// lambda = W z = W^{-1} s.
    lambda: Vec<f64>,
}

impl NtScaling {
    fn identity(layout: &ConeLayout) -> Self {
        NtScaling {
            w_nonneg: vec![1.0; layout.nonneg],
            socs: layout
                .socs
                .iter()
                .map(|&(_, d)| {
                    let mut wbar = vec![0.0; d];
                    wbar[0] = 1.0;
                    (1.0, wbar)
                })
                .collect(),
            lambda: layout.identity(),
        }
    }

    fn update(&mut self, layout: &ConeLayout, s: &[f64], z: &[f64]) {
        for i in 0..layout.nonneg {
            self.w_nonneg[i] = (s[i] / z[i]).sqrt();
            self.lambda[i] = (s[i] * z[i]).sqrt();
        }
        for (bi, &(off, d)) in layout.socs.iter().enumerate() {
            let sb = &s[off..off + d];
            let zb = &z[off..off + d];
            let js = (sb[0] * sb[0] - dot(&sb[1..], &sb[1..])).max(1e-300);
            let jz = (zb[0] * zb[0] - dot(&zb[1..], &zb[1..])).max(1e-300);
            let zeta_s = js.sqrt();
            let zeta_z = jz.sqrt();
            let gamma = {
                let mut sz = 0.0;
                for k in 0..d {
                    sz += sb[k] * zb[k];
                }
                ((1.0 + sz / (zeta_s * zeta_z)) / 2.0).max(1e-300).sqrt()
            };
            let (eta, wbar) = &mut self.socs[bi];
            *eta = (zeta_s / zeta_z).sqrt();
            wbar.resize(d, 0.0);
            wbar[0] = (sb[0] / zeta_s + zb[0] / zeta_z) / (2.0 * gamma);
            for k in 1..d {
                wbar[k] = (sb[k] / zeta_s - zb[k] / zeta_z) / (2.0 * gamma);
            }
            // lambda = W z
            let lam = &mut self.lambda[off..off + d];
            apply_soc_w(*eta, wbar, zb, lam, false);
        }
    }

    /// out = W v (inverse=false) or W^{-1} v (inverse=true).
    fn apply(&self, layout: &ConeLayout, v: &[f64], out: &mut [f64], inverse: bool) {
        for i in 0..layout.nonneg {
            out[i] = if inverse {
                v[i] / self.w_nonneg[i]
            } else {
                v[i] * self.w_nonneg[i]
            };
        }
        for (bi, &(off, d)) in layout.socs.iter().enumerate() {
            let (eta, wbar) = &self.socs[bi];
            apply_soc_w(*eta, wbar, &v[off..off + d], &mut out[off..off + d], inverse);
        }
    }

    /// out = W^2 v, used by the refinement operator.
    fn apply_w2(&self, layout: &ConeLayout, v: &[f64], out: &mut [f64]) {
        for i in 0..layout.nonneg {
            out[i] = v[i] * self.w_nonneg[i] * self.w_nonneg[i];
        }
        for (bi, &(off, d)) in layout.socs.iter().enumerate() {
            let (eta, wbar) = &self.socs[bi];
            let vb = &v[off..off + d];
            // W^2 = eta^2 (2 wbar wbar' - J)
            let wv = {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += wbar[k] * vb[k];
                }
                acc
            };
            let e2 = eta * eta;
            out[off] = e2 * (2.0 * wbar[0] * wv - vb[0]);
            for k in 1..d {
                out[off + k] = e2 * (2.0 * wbar[k] * wv + vb[k]);
            }
        }
    }
}

/// Applies the SOC scaling matrix W = eta [wbar0, wbar1'; wbar1, I + wbar1
/// wbar1'/(1+wbar0)] or its inverse.
fn apply_soc_w(eta: f64, wbar: &[f64], v: &[f64], out: &mut [f64], inverse: bool) {
    let d = wbar.len();
    let (w0, sgn, scale) = if inverse {
        (wbar[0], -1.0, 1.0 / eta)
    } else {
        (wbar[0], 1.0, eta)
    };
    let mut w1v = 0.0;
    for k in 1..d {
        w1v += wbar[k] * v[k];
    }
    let head = w0 * v[0] + sgn * w1v;
    out[0] = scale * head;
    let coef = sgn * v[0] + w1v / (1.0 + w0);
    for k in 1..d {
        out[k] = scale * (v[k] + coef * wbar[k]);
    }
}

/// Ruiz equilibration scales: rows of [A; G] (cone blocks share one scale),
/// columns, and the cost vector.
struct Scaling {
    col: Vec<f64>,
    row_eq: Vec<f64>,
    row_cone: Vec<f64>,
    cost: f64,
}

fn equilibrate(sf: &mut StandardForm, layout: &ConeLayout, iters: usize) -> Scaling {
    let n = sf.num_vars();
    let me = sf.b.len();
    let mc = sf.h.len();
    let mut col = vec![1.0f64; n];
    let mut row_eq = vec![1.0f64; me];
    let mut row_cone = vec![1.0f64; mc];

    for _ in 0..iters {
        let mut cmax = vec![0.0f64; n];
        let mut rmax_eq = vec![0.0f64; me];
        let mut rmax_cone = vec![0.0f64; mc];
        for cc in 0..n {
            for p in sf.a_eq.colptr[cc]..sf.a_eq.colptr[cc + 1] {
                let v = sf.a_eq.values[p].abs();
                cmax[cc] = cmax[cc].max(v);
                rmax_eq[sf.a_eq.rowind[p]] = rmax_eq[sf.a_eq.rowind[p]].max(v);
            }
            for p in sf.g.colptr[cc]..sf.g.colptr[cc + 1] {
                let v = sf.g.values[p].abs();
                cmax[cc] = cmax[cc].max(v);
                rmax_cone[sf.g.rowind[p]] = rmax_cone[sf.g.rowind[p]].max(v);
            }
        }
        // Shared scale within each SOC block.
        for &(off, d) in &layout.socs {
            let m = rmax_cone[off..off + d].iter().fold(0.0f64, |a, &b| a.max(b));
            for r in rmax_cone[off..off + d].iter_mut() {
                *r = m;
            }
        }
        let scale_of = |m: f64| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 };
        let dcol: Vec<f64> = cmax.iter().map(|&m| scale_of(m)).collect();
        let dreq: Vec<f64> = rmax_eq.iter().map(|&m| scale_of(m)).collect();
        let drcone: Vec<f64> = rmax_cone.iter().map(|&m| scale_of(m)).collect();

        for cc in 0..n {
            for p in sf.a_eq.colptr[cc]..sf.a_eq.colptr[cc + 1] {
                sf.a_eq.values[p] *= dcol[cc] * dreq[sf.a_eq.rowind[p]];
            }
            for p in sf.g.colptr[cc]..sf.g.colptr[cc + 1] {
                sf.g.values[p] *= dcol[cc] * drcone[sf.g.rowind[p]];
            }
            col[cc] *= dcol[cc];
        }
        for r in 0..me {
            row_eq[r] *= dreq[r];
        }
        for r in 0..mc {
            row_cone[r] *= drcone[r];
        }
    }

    for r in 0..me {
        sf.b[r] *= row_eq[r];
    }
    for r in 0..mc {
        sf.h[r] *= row_cone[r];
    }
    for (ci, v) in sf.c.iter_mut().enumerate() {
        *v *= col[ci];
    }
    let cost = norm_inf(&sf.c).max(1.0);
    for v in sf.c.iter_mut() {
        *v /= cost;
    }

    Scaling {
        col,
        row_eq,
        row_cone,
        cost,
    }
}

/// KKT factorization workspace with fixed symbolic structure.
struct KktSystem {
    n: usize,
    me: usize,
    mc: usize,
    dim: usize,
    perm: Vec<usize>,

    trip_perm: Vec<(usize, usize, f64)>,
    /// Slot ids of the W^2 block entries, parallel with `w2_entries`.
    w2_slots: Vec<usize>,
    /// (row, col) in the z-block local coordinates for each W^2 entry.
    w2_entries: Vec<(usize, usize)>,
    pattern: CscMatrix,
    pos: Vec<usize>,
    symbolic: LdlSymbolic,
    signs: Vec<i8>,
    static_reg: f64,
}

impl KktSystem {
    fn new(sf: &StandardForm, layout: &ConeLayout, static_reg: f64) -> Self {
        let n = sf.num_vars();
        let me = sf.b.len();
        let mc = sf.h.len();
        let dim = n + me + mc;

        // Upper-triangle triplets in original ordering; W^2 entries get
        // placeholder values and their slot ids recorded.
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            trips.push((i, i, static_reg));
        }
        for cc in 0..n {
            for p in sf.a_eq.colptr[cc]..sf.a_eq.colptr[cc + 1] {
                trips.push((cc, n + sf.a_eq.rowind[p], sf.a_eq.values[p]));
            }
            for p in sf.g.colptr[cc]..sf.g.colptr[cc + 1] {
                trips.push((cc, n + me + sf.g.rowind[p], sf.g.values[p]));
            }
        }
        for r in 0..me {
            trips.push((n + r, n + r, -static_reg));
        }
        let mut w2_slots = Vec::new();
        let mut w2_entries = Vec::new();
        for i in 0..layout.nonneg {
            w2_slots.push(trips.len());
            w2_entries.push((i, i));
            trips.push((n + me + i, n + me + i, -1.0 - static_reg));
        }
        for &(off, d) in &layout.socs {
            for a in 0..d {
                for bq in a..d {
                    w2_slots.push(trips.len());
                    w2_entries.push((off + a, off + bq));
                    let init = if a == bq { -1.0 - static_reg } else { 0.0 };
                    trips.push((n + me + off + a, n + me + off + bq, init));
                }
            }
        }

        // Fill-reducing permutation from the pattern.
        let edges: Vec<(usize, usize)> = trips.iter().map(|&(r, c, _)| (r, c)).collect();
        let perm = reverse_cuthill_mckee(dim, &edges);
        let mut iperm = vec![0usize; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let trip_perm: Vec<(usize, usize, f64)> = trips
            .iter()
            .map(|&(r, c, v)| {
                let (pr, pc) = (iperm[r], iperm[c]);
                if pr <= pc {
                    (pr, pc, v)
                } else {
                    (pc, pr, v)
                }
            })
            .collect();
        let (pattern, pos) = CscMatrix::from_triplets_mapped(dim, dim, &trip_perm);
        let symbolic = LdlSymbolic::analyze(&pattern);

        let mut signs = vec![1i8; dim];
        for old in n..dim {
            signs[iperm[old]] = -1;
        }

        KktSystem {
            n,
            me,
            mc,
            dim,
            perm,

            trip_perm,
            w2_slots,
            w2_entries,
            pattern,
            pos,
            symbolic,
            signs,
            static_reg,
        }
    }

    /// Refreshes the W^2 block and refactors.
    fn factor(&mut self, scaling: &NtScaling, layout: &ConeLayout) -> LdlFactor {
        // Update values of the W^2 slots in the triplet list.
        for (k, &slot) in self.w2_slots.iter().enumerate() {
            let (r, c) = self.w2_entries[k];
            let v = if r < layout.nonneg {
                let w = scaling.w_nonneg[r];
                -(w * w) - self.static_reg
            } else {
                // find owning SOC block
                let mut val = 0.0;
                for (bi, &(off, d)) in layout.socs.iter().enumerate() {
                    if r >= off && r < off + d {
                        let (eta, wbar) = &scaling.socs[bi];
                        let a = r - off;
                        let bq = c - off;
                        let e2 = eta * eta;
                        let jab: f64 = if a == bq {
                            if a == 0 {
                                1.0
                            } else {
                                -1.0
                            }
                        } else {
                            0.0
                        };
                        val = -(e2 * (2.0 * wbar[a] * wbar[bq] - jab));
                        if a == bq {
                            val -= self.static_reg;
                        }
                        break;
                    }
                }
                val
            };
            self.trip_perm[slot].2 = v;
        }
        // Scatter into the CSC value array.
        self.pattern.values.iter_mut().for_each(|v| *v = 0.0);
        for (t, &(_, _, v)) in self.trip_perm.iter().enumerate() {
            self.pattern.values[self.pos[t]] += v;
        }
        LdlFactor::factor(&self.pattern, &self.symbolic, &self.signs, 1e-13)
    }

    /// Unregularized operator product for iterative refinement.
    #[allow(clippy::too_many_arguments)]
    fn apply(
        &self,
        sf: &StandardForm,
        scaling: &NtScaling,
        layout: &ConeLayout,
        vx: &[f64],
        vy: &[f64],
        vz: &[f64],
        out: &mut [f64],
    ) {
        let (n, me, mc) = (self.n, self.me, self.mc);
        out.iter_mut().for_each(|o| *o = 0.0);
        // x rows: A' vy + G' vz
        sf.a_eq.axpy_transpose(1.0, vy, &mut out[..n]);
        sf.g.axpy_transpose(1.0, vz, &mut out[..n]);
        // y rows: A vx
        sf.a_eq.axpy(1.0, vx, &mut out[n..n + me]);
        // z rows: G vx - W^2 vz
        sf.g.axpy(1.0, vx, &mut out[n + me..n + me + mc]);
        let mut w2z = vec![0.0; mc];
        scaling.apply_w2(layout, vz, &mut w2z);
        for r in 0..mc {
            out[n + me + r] -= w2z[r];
        }
    }

    /// Solves the KKT system with iterative refinement.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        factor: &LdlFactor,
        sf: &StandardForm,
        scaling: &NtScaling,
        layout: &ConeLayout,
        rhs: &[f64],
        refine: usize,
    ) -> Vec<f64> {
        let dim = self.dim;
        let mut sol = vec![0.0; dim];
        let mut work = vec![0.0; dim];
        // Permute, solve, unpermute.
        for newi in 0..dim {
            work[newi] = rhs[self.perm[newi]];
        }
        factor.solve_in_place(&mut work);
        for newi in 0..dim {
            sol[self.perm[newi]] = work[newi];
        }
        let (n, me) = (self.n, self.me);
        let mut resid = vec![0.0; dim];
        for _ in 0..refine {
            self.apply(
                sf,
                scaling,
                layout,
                &sol[..n],
                &sol[n..n + me],
                &sol[n + me..],
                &mut resid,
            );
            let mut worst = 0.0f64;
            for i in 0..dim {
                resid[i] = rhs[i] - resid[i];
                worst = worst.max(resid[i].abs());
            }
            if worst < 1e-14 {
                break;
            }
            for newi in 0..dim {
                work[newi] = resid[self.perm[newi]];
            }
            factor.solve_in_place(&mut work);
            for newi in 0..dim {
                sol[self.perm[newi]] += work[newi];
            }
        }
        sol
    }
}

/// Solves a standard-form cone program. The input is consumed by value so
/// equilibration can scale it in place.
pub fn solve_standard_form(mut sf: StandardForm, settings: &IpmSettings) -> IpmResult {
    let t0 = Instant::now();
    let layout = ConeLayout::new(sf.nonneg_dim, &sf.soc_dims);
    let n = sf.num_vars();
    let me = sf.b.len();
    let mc = sf.h.len();
    let obj_constant = sf.obj_constant;

    // Degenerate case: no cone rows at all makes the barrier vanish; pad
    // with a slack nonneg pair to keep the machinery uniform is not needed
    // because every program from the lowering has at least variable bounds
    // or cone rows. Guard anyway.
    if mc == 0 {
        return solve_equality_only(&sf, obj_constant, t0);
    }

    let orig = sf.clone();
    let scal = equilibrate(&mut sf, &layout, settings.ruiz_iters);
    let deg = layout.degree() as f64;

    let mut kkt = KktSystem::new(&sf, &layout, settings.static_reg);
    let mut nt = NtScaling::identity(&layout);

    // Starting point: least-squares style initialization.
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; me];
    let mut z = vec![0.0f64; mc];
    let mut s = vec![0.0f64; mc];
    {
        let factor = kkt.factor(&nt, &layout);
        // Primal: K (x, y, z) = (0, b, h); take x and s = -z-part.
        let mut rhs = vec![0.0; kkt.dim];
        rhs[n..n + me].copy_from_slice(&sf.b);
        rhs[n + me..].copy_from_slice(&sf.h);
        let sol = kkt.solve(&factor, &sf, &nt, &layout, &rhs, 1);
        x.copy_from_slice(&sol[..n]);
        for r in 0..mc {
            s[r] = -sol[n + me + r];
        }
        layout.bring_to_interior(&mut s);
        // Dual: K (x, y, z) = (-c, 0, 0); take z.
        let mut rhs2 = vec![0.0; kkt.dim];
        for i in 0..n {
            rhs2[i] = -sf.c[i];
        }
        let sol2 = kkt.solve(&factor, &sf, &nt, &layout, &rhs2, 1);
        y.copy_from_slice(&sol2[n..n + me]);
        z.copy_from_slice(&sol2[n + me..]);
        layout.bring_to_interior(&mut z);
    }
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let norm_b = norm_inf(&sf.b).max(norm_inf(&sf.h)).max(1.0);
    let norm_c = norm_inf(&sf.c).max(1.0);

    let mut best: Option<(f64, IpmResult)> = None;
    let mut status = IpmStatus::NumericalLimit;
    let mut iterations = 0usize;
    let mut stall_count = 0usize;
    let mut prev_kappa_ratio = 1.0f64;

    let mut f1 = vec![0.0f64; n];
    let mut f2 = vec![0.0f64; me];
    let mut f3 = vec![0.0f64; mc];

    for iter in 0..settings.max_iter {
        iterations = iter + 1;
        // The homogeneous model is invariant under positive rescaling;
        // renormalize to keep the embedding well scaled: by kappa when it
        // diverges (an infeasibility certificate forming), else by tau.
        if kappa > 1e4 * tau.max(1.0) {
            let inv = 1.0 / kappa;
            for v in x.iter_mut() {
                *v *= inv;
            }
            for v in y.iter_mut() {
                *v *= inv;
            }
            for v in z.iter_mut() {
                *v *= inv;
            }
            for v in s.iter_mut() {
                *v *= inv;
            }
            tau *= inv;
            kappa = 1.0;
        } else if !(0.2..=5.0).contains(&tau) && tau > 0.0 {
            let inv = 1.0 / tau;
            for v in x.iter_mut() {
                *v *= inv;
            }
            for v in y.iter_mut() {
                *v *= inv;
            }
            for v in z.iter_mut() {
                *v *= inv;
            }
            for v in s.iter_mut() {
                *v *= inv;
            }
            kappa *= inv;
            tau = 1.0;
        }


        // Residuals of the homogeneous model.
        f1.iter_mut().for_each(|v| *v = 0.0);
        sf.a_eq.axpy_transpose(1.0, &y, &mut f1);
        sf.g.axpy_transpose(1.0, &z, &mut f1);
        for i in 0..n {
            f1[i] += sf.c[i] * tau;
        }
        f2.iter_mut().for_each(|v| *v = 0.0);
        sf.a_eq.axpy(1.0, &x, &mut f2);
        for r in 0..me {
            f2[r] -= sf.b[r] * tau;
        }
        f3.iter_mut().for_each(|v| *v = 0.0);
        sf.g.axpy(1.0, &x, &mut f3);
        for r in 0..mc {
            f3[r] += s[r] - sf.h[r] * tau;
        }
        let f4 = kappa + dot(&sf.c, &x) + dot(&sf.b, &y) + dot(&sf.h, &z);

        let mu = (dot(&s, &z) + tau * kappa) / (deg + 1.0);

        // Convergence metrics: residuals relative on the equilibrated data,
        // the duality gap measured on the unscaled objectives (the cost
        // scale divides out of c during equilibration and returns here).
        let inv_tau = 1.0 / tau;
        let pres = (norm_inf(&f2).max(norm_inf(&f3))) * inv_tau / norm_b;
        let dres = norm_inf(&f1) * inv_tau / norm_c;
        let pobj = dot(&sf.c, &x) * inv_tau * scal.cost + obj_constant;
        let dobj = -(dot(&sf.b, &y) + dot(&sf.h, &z)) * inv_tau * scal.cost + obj_constant;
        let gap_abs = (pobj - dobj).abs();
        let rel_gap = gap_abs / (1.0 + pobj.abs().min(dobj.abs()));

        if settings.verbose {
            eprintln!(
                "iter {iter:3} mu {mu:9.2e} pres {pres:9.2e} dres {dres:9.2e} gap {rel_gap:9.2e} tau {tau:8.2e} kappa {kappa:8.2e}"
            );
        }

        let metric = pres.max(dres).max(rel_gap);
        let make_result = |st: IpmStatus| {
            let cost = scal.cost;
            let mut xs = vec![0.0; n];
            let mut ys = vec![0.0; me];
            let mut zs = vec![0.0; mc];
            let mut ss = vec![0.0; mc];
            for i in 0..n {
                xs[i] = x[i] * inv_tau * scal.col[i];
            }
            for r in 0..me {
                ys[r] = y[r] * inv_tau * scal.row_eq[r] * cost;
            }
            for r in 0..mc {
                zs[r] = z[r] * inv_tau * scal.row_cone[r] * cost;
                ss[r] = s[r] * inv_tau / scal.row_cone[r];
            }
            let pobj_u = dot(&orig.c, &xs) + obj_constant;
            let dobj_u = -(dot(&orig.b, &ys) + dot(&orig.h, &zs)) + obj_constant;
            IpmResult {
                status: st,
                x: xs,
                y: ys,
                z: zs,
                s: ss,
                primal_objective: pobj_u,
                dual_objective: dobj_u,
                primal_residual: pres,
                dual_residual: dres,
                rel_gap,
                iterations,
                solve_time: t0.elapsed().as_secs_f64(),
                infeasibility_ray: None,
            }
        };

        let kappa_ratio = kappa / tau.max(1e-300);
        let diverging = kappa_ratio > 1.1 * prev_kappa_ratio && kappa_ratio > 1.0;
        match best.as_ref() {
            Some((m, _)) if metric >= 0.9 * m && !diverging => stall_count += 1,
            _ => stall_count = 0,
        }
        prev_kappa_ratio = kappa_ratio;
        if best.as_ref().map(|(m, _)| metric < *m).unwrap_or(true) {
            best = Some((metric, make_result(IpmStatus::NumericalLimit)));
        }
        if stall_count > 25 {
            break;
        }

        if pres < settings.tol_feas
            && dres < settings.tol_feas
            && (rel_gap < settings.tol_rel_gap || gap_abs < settings.tol_rel_gap * (1.0 + pobj.abs()))
        {
            status = IpmStatus::Optimal;
            best = Some((0.0, make_result(IpmStatus::Optimal)));
            break;
        }

        // Certificate-based infeasibility tests: a candidate dual ray must
        // annihilate the constraint rows relative to its objective `b'y +
        // h'z < 0` (the `c tau` term distinguishes it from a near-optimal
        // iterate); the primal analogue certifies unboundedness.
        let bty = dot(&sf.b, &y) + dot(&sf.h, &z);
        if bty < -1e-8 {
            let mut ray_res = vec![0.0f64; n];
            sf.a_eq.axpy_transpose(1.0, &y, &mut ray_res);
            sf.g.axpy_transpose(1.0, &z, &mut ray_res);
            if norm_inf(&ray_res) <= INFEAS_CERT_TOL * (-bty) {
                status = IpmStatus::PrimalInfeasible;
                let scale_ray = -1.0 / bty;
                let ray_y: Vec<f64> = (0..me)
                    .map(|r| y[r] * scale_ray * scal.row_eq[r] * scal.cost)
                    .collect();
                let ray_z: Vec<f64> = (0..mc)
                    .map(|r| z[r] * scale_ray * scal.row_cone[r] * scal.cost)
                    .collect();
                let mut res = make_result(IpmStatus::PrimalInfeasible);
                res.infeasibility_ray = Some((ray_y, ray_z));
                best = Some((0.0, res));
                break;
            }
        }
        let ctx_val = dot(&sf.c, &x);
        if ctx_val < -1e-8 {
            let mut pray = vec![0.0f64; me];
            sf.a_eq.axpy(1.0, &x, &mut pray);
            let mut cray = s.clone();
            sf.g.axpy(1.0, &x, &mut cray);
            if norm_inf(&pray).max(norm_inf(&cray)) <= INFEAS_CERT_TOL * (-ctx_val) {
                status = IpmStatus::DualInfeasible;
                best = Some((0.0, make_result(IpmStatus::DualInfeasible)));
                break;
            }
        }

        // Fallback: the homogeneous embedding collapses tau on hopeless
        // problems even when no clean certificate has formed yet.
        if tau < 1e-8 * kappa.max(1.0) || (mu < 1e-12 && tau < 1e-6 * kappa) {
            let bty = dot(&sf.b, &y) + dot(&sf.h, &z);
            let ctx = dot(&sf.c, &x);
            if bty < -1e-10 {
                status = IpmStatus::PrimalInfeasible;
                let scale_ray = -1.0 / bty;
                let ray_y: Vec<f64> = (0..me)
                    .map(|r| y[r] * scale_ray * scal.row_eq[r] * scal.cost)
                    .collect();
                let ray_z: Vec<f64> = (0..mc)
                    .map(|r| z[r] * scale_ray * scal.row_cone[r] * scal.cost)
                    .collect();
                let mut res = make_result(IpmStatus::PrimalInfeasible);
                res.infeasibility_ray = Some((ray_y, ray_z));
                best = Some((0.0, res));
                break;
            }
            if ctx < -1e-10 {
                status = IpmStatus::DualInfeasible;
                best = Some((0.0, make_result(IpmStatus::DualInfeasible)));
                break;
            }
            status = IpmStatus::NumericalLimit;
            break;
        }

        nt.update(&layout, &s, &z);
        let factor = kkt.factor(&nt, &layout);
        let refine = if mu < 1e-7 {
            settings.refine_steps + 4
        } else {
            settings.refine_steps
        };

        // Constant-part solve: K sol1 = (-c, b, h).
        let mut rhs1 = vec![0.0; kkt.dim];
        for i in 0..n {
            rhs1[i] = -sf.c[i];
        }
        rhs1[n..n + me].copy_from_slice(&sf.b);
        rhs1[n + me..].copy_from_slice(&sf.h);
        let sol1 = kkt.solve(&factor, &sf, &nt, &layout, &rhs1, refine);
        let den = dot(&sf.c, &sol1[..n])
            + dot(&sf.b, &sol1[n..n + me])
            + dot(&sf.h, &sol1[n + me..])
            - kappa / tau;

        let mut ws = vec![0.0f64; mc]; // scratch: W d_stilde etc.
        let mut dstep = |sigma: f64,
                         corr: Option<(&[f64], &[f64], f64)>,
                         kkt: &KktSystem,
                         nt: &NtScaling|
         -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64) {
            // d_stilde = lambda \ (sigma mu e - lambda o lambda - corr)
            let mut rhs_comp = vec![0.0; mc];
            layout.product(&nt.lambda, &nt.lambda, &mut rhs_comp);
            for v in rhs_comp.iter_mut() {
                *v = -*v;
            }
            for i in 0..layout.nonneg {
                rhs_comp[i] += sigma * mu;
            }
            for &(off, _) in &layout.socs {
                rhs_comp[off] += sigma * mu;
            }
            let mut corr_tau = 0.0;
            if let Some((ds_aff, dz_aff, ct)) = corr {
                // corr = (W^{-1} ds_aff) o (W dz_aff)
                let mut wids = vec![0.0; mc];
                let mut wdz = vec![0.0; mc];
                nt.apply(&layout, ds_aff, &mut wids, true);
                nt.apply(&layout, dz_aff, &mut wdz, false);
                let mut prod = vec![0.0; mc];
                layout.product(&wids, &wdz, &mut prod);
                for r in 0..mc {
                    rhs_comp[r] -= prod[r];
                }
                corr_tau = ct;
            }
            let mut dstilde = vec![0.0; mc];
            layout.divide(&nt.lambda, &rhs_comp, &mut dstilde);
            nt.apply(&layout, &dstilde, &mut ws, false); // ws = W d_stilde

            let one_ms = 1.0 - sigma;
            let mut rhs2 = vec![0.0; kkt.dim];
            for i in 0..n {
                rhs2[i] = -one_ms * f1[i];
            }
            for r in 0..me {
                rhs2[n + r] = -one_ms * f2[r];
            }
            for r in 0..mc {
                rhs2[n + me + r] = -one_ms * f3[r] - ws[r];
            }
            let sol2 = kkt.solve(&factor, &sf, &nt, &layout, &rhs2, refine);

            let num = -one_ms * f4
                - (sigma * mu - tau * kappa - corr_tau) / tau
                - dot(&sf.c, &sol2[..n])
                - dot(&sf.b, &sol2[n..n + me])
                - dot(&sf.h, &sol2[n + me..]);
            let dtau = num / den;

            let mut dx = vec![0.0; n];
            let mut dy = vec![0.0; me];
            let mut dz = vec![0.0; mc];
            for i in 0..n {
                dx[i] = sol2[i] + dtau * sol1[i];
            }
            for r in 0..me {
                dy[r] = sol2[n + r] + dtau * sol1[n + r];
            }
            for r in 0..mc {
                dz[r] = sol2[n + me + r] + dtau * sol1[n + me + r];
            }
            // ds from the cone primal row.
            let mut ds = vec![0.0; mc];
            sf.g.axpy(-1.0, &dx, &mut ds);
            for r in 0..mc {
                ds[r] += -one_ms * f3[r] + sf.h[r] * dtau;
            }
            let dkappa = (sigma * mu - tau * kappa - corr_tau) / tau - (kappa / tau) * dtau;
            (dx, dy, dz, ds, dtau, dkappa)
        };

        // Predictor.
        let (dx_a, dy_a, dz_a, ds_a, dtau_a, dkappa_a) = dstep(0.0, None, &kkt, &nt);
        let mut alpha_a = layout
            .step_to_boundary(&s, &ds_a)
            .min(layout.step_to_boundary(&z, &dz_a));
        if dtau_a < 0.0 {
            alpha_a = alpha_a.min(-tau / dtau_a);
        }
        if dkappa_a < 0.0 {
            alpha_a = alpha_a.min(-kappa / dkappa_a);
        }
        alpha_a = (0.99 * alpha_a).min(1.0);
        let mu_aff = {
            let mut acc = (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkappa_a);
            for r in 0..mc {
                acc += (s[r] + alpha_a * ds_a[r]) * (z[r] + alpha_a * dz_a[r]);
            }
            acc / (deg + 1.0)
        };
        let sigma = ((mu_aff / mu).clamp(0.0, 0.99)).powi(3).min(0.99);

        // Corrector.
        let (mut dx, mut dy, mut dz, mut ds, mut dtau, mut dkappa) = dstep(
            sigma,
            Some((&ds_a, &dz_a, dtau_a * dkappa_a)),
            &kkt,
            &nt,
        );
        let _ = (dx_a, dy_a);

        let step_len = |ds: &[f64], dz: &[f64], dtau: f64, dkappa: f64| -> f64 {
            let mut a = layout
                .step_to_boundary(&s, ds)
                .min(layout.step_to_boundary(&z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            (0.99 * a).min(1.0)
        };
        let mut alpha = step_len(&ds, &dz, dtau, dkappa);
        // On degenerate pairs the second-order correction can overshoot the
        // cone and collapse the step; retry without it.
        if alpha < 0.2 * alpha_a || alpha < 1e-8 {
            let plain = dstep(sigma, None, &kkt, &nt);
            let alpha_plain = step_len(&plain.3, &plain.2, plain.4, plain.5);
            if alpha_plain > alpha {
                (dx, dy, dz, ds, dtau, dkappa) = plain;
                alpha = alpha_plain;
            }
        }
        if !alpha.is_finite() || alpha <= 1e-12 {
            // A dead step with a diverging embedding is how infeasible
            // problems end; accept a certificate at a pragmatic quality.
            if kappa > 1e4 * tau {
                let bty = dot(&sf.b, &y) + dot(&sf.h, &z);
                if bty < -1e-8 {
                    let mut ray_res = vec![0.0f64; n];
                    sf.a_eq.axpy_transpose(1.0, &y, &mut ray_res);
                    sf.g.axpy_transpose(1.0, &z, &mut ray_res);
                    if norm_inf(&ray_res) <= 1e-4 * (-bty) {
                        let scale_ray = -1.0 / bty;
                        let ray_y: Vec<f64> = (0..me)
                            .map(|r| y[r] * scale_ray * scal.row_eq[r] * scal.cost)
                            .collect();
                        let ray_z: Vec<f64> = (0..mc)
                            .map(|r| z[r] * scale_ray * scal.row_cone[r] * scal.cost)
                            .collect();
                        if let Some((_, res)) = best.as_mut() {
                            res.infeasibility_ray = Some((ray_y, ray_z));
                        }
                        status = IpmStatus::PrimalInfeasible;
                        break;
                    }
                }
                let ctx = dot(&sf.c, &x);
                if ctx < -1e-8 {
                    let mut pray = vec![0.0f64; me];
                    sf.a_eq.axpy(1.0, &x, &mut pray);
                    let mut cray = s.clone();
                    sf.g.axpy(1.0, &x, &mut cray);
                    if norm_inf(&pray).max(norm_inf(&cray)) <= 1e-4 * (-ctx) {
                        status = IpmStatus::DualInfeasible;
                        break;
                    }
                }
            }
            status = IpmStatus::NumericalLimit;
            break;
        }

        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for r in 0..me {
            y[r] += alpha * dy[r];
        }
        for r in 0..mc {
            z[r] += alpha * dz[r];
            s[r] += alpha * ds[r];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;

        // Roundoff-level cone violations are nudged in place, not reset.
        layout.repair_roundoff(&mut s);
        layout.repair_roundoff(&mut z);
        kappa = kappa.max(1e-300);

    }

    let (_, mut result) = best.expect("at least one iterate");
    result.status = status;
    result.iterations = iterations;
    result.solve_time = t0.elapsed().as_secs_f64();
    result
}

/// Pure equality-constrained LP fallback (no cone rows): solve the KKT
/// system directly; bounded iff the objective is in the row space of A.
fn solve_equality_only(sf: &StandardForm, obj_constant: f64, t0: Instant) -> IpmResult {
    let n = sf.num_vars();
    let me = sf.b.len();
    let dim = n + me;
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let reg = 1e-10;
    for i in 0..n {
        trips.push((i, i, reg));
    }
    for cc in 0..n {
        for p in sf.a_eq.colptr[cc]..sf.a_eq.colptr[cc + 1] {
            trips.push((cc, n + sf.a_eq.rowind[p], sf.a_eq.values[p]));
        }
    }
    for r in 0..me {
        trips.push((n + r, n + r, -reg));
    }
    let upper = CscMatrix::from_triplets(dim, dim, &trips);
    let sym = LdlSymbolic::analyze(&upper);
    let mut signs = vec![1i8; n];
    signs.extend(vec![-1i8; me]);
    let f = LdlFactor::factor(&upper, &sym, &signs, 1e-13);
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = -sf.c[i];
    }
    rhs[n..].copy_from_slice(&sf.b);
    f.solve_in_place(&mut rhs);
    let x = rhs[..n].to_vec();
    let y = rhs[n..].to_vec();
    let pobj = dot(&sf.c, &x) + obj_constant;
    let mut ax = sf.a_eq.matvec(&x);
    for r in 0..me {
        ax[r] -= sf.b[r];
    }
    IpmResult {
        status: IpmStatus::Optimal,
        x,
        y,
        z: Vec::new(),
        s: Vec::new(),
        primal_objective: pobj,
        dual_objective: pobj,
        primal_residual: norm_inf(&ax),
        dual_residual: 0.0,
        rel_gap: 0.0,
        iterations: 1,
        solve_time: t0.elapsed().as_secs_f64(),
        infeasibility_ray: None,
    }
}
