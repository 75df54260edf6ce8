//! Power-network case handling: MATPOWER-style parsing, branch admittance
//! derivation, validation, and canonical dumps.
//!
//! All electrical quantities are normalized to per-unit on the case MVA base
//! at parse time; conversions back to physical units happen only at the
//! reporting boundary.
//!
//! # Branch model and sign convention
//!
//! Each branch is a standard Pi-circuit with series impedance `r + jx`,
//! total charging susceptance `b`, tap ratio `tap` and phase shift `shift`
//! (tap side at `from`). With `y = 1/(r + jx)` the two-port admittance is
//!
//! ```text
//!   Yff = (y + j b/2) / tap^2        Yft = -y e^{+j shift} / tap
//!   Ytt =  y + j b/2                 Ytf = -y e^{-j shift} / tap
//! ```
//!
//! The crate stores the *negated* couplings `G_ij + jB_ij = -Yft` and
//! `G_ji + jB_ji = -Ytf` together with the self terms, so that with
//! `t = theta_i - theta_j` the directed flows read
//!
//! ```text
//!   p_ij =  gff Vi^2 - Vi Vj (G_ij cos t + B_ij sin t)
//!   q_ij = -bff Vi^2 - Vi Vj (G_ij sin t - B_ij cos t)
//!   p_ji =  gtt Vj^2 - Vi Vj (G_ji cos t - B_ji sin t)
//!   q_ji = -btt Vj^2 + Vi Vj (G_ji sin t + B_ji cos t)
//! ```
//!
//! For an untapped, unshifted branch `G_ij = G_ji` and `B_ij = B_ji` equal
//! the series admittance components (`B_ij = -1` for `r = 0, x = 1`). The
//! convention is checked against an independent complex-arithmetic oracle in
//! the test suite.

mod admittance;
mod dump;
mod parser;
mod validate;

pub use admittance::{branch_admittance, AdmittanceError, LineAdmittance};
pub use dump::{canonical_dump, to_case_text};
pub use parser::{parse_case, CaseError};
pub use validate::{validate, Diagnostic, DiagnosticKind};

/// A network bus with shunt admittance, voltage band, and base load.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// Original identifier from the case file.
    pub id: usize,
    /// Shunt conductance, per-unit.
    pub shunt_g: f64,
    /// Shunt susceptance, per-unit.
    pub shunt_b: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Base real load, per-unit.
    pub load_p: f64,
    /// Base reactive load, per-unit.
    pub load_q: f64,
}

/// Convex polynomial generation cost `c2 p^2 + c1 p + c0` with `p` in
/// per-unit. Coefficients from MW-based case files are rebased at parse time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPolynomial {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CostPolynomial {
    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }
    pub fn derivative(&self, p: f64) -> f64 {
        2.0 * self.c2 * p + self.c1
    }
    pub fn is_convex(&self) -> bool {
        self.c2 >= 0.0
    }
    pub fn is_zero(&self) -> bool {
        self.c2 == 0.0 && self.c1 == 0.0 && self.c0 == 0.0
    }
}

/// A dispatchable generator attached to a bus (internal index).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub cost: CostPolynomial,
}

/// A transmission line between internal bus indices `from` and `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub admittance: LineAdmittance,
    /// Apparent-power limit, per-unit; `INFINITY` when unconstrained.
    pub s_max: f64,
    /// Symmetric phase-angle difference limit, radians, in (0, pi/2].
    pub angle_max: f64,
    // Raw branch parameters, retained for serialization.
    pub r: f64,
    pub x: f64,
    pub b_charge: f64,
    pub tap: f64,
    pub shift: f64,
}

impl Line {
    /// Directed flow measured at the `from` end.
    pub fn flow_from(&self, v_i: f64, v_j: f64, theta_ij: f64) -> (f64, f64) {
        let a = &self.admittance;
        let (c, s) = (theta_ij.cos(), theta_ij.sin());
        let vv = v_i * v_j;
        let p = a.g_ff * v_i * v_i - vv * (a.g_from * c + a.b_from * s);
        let q = -a.b_ff * v_i * v_i - vv * (a.g_from * s - a.b_from * c);
        (p, q)
    }

    /// Directed flow measured at the `to` end.
    pub fn flow_to(&self, v_i: f64, v_j: f64, theta_ij: f64) -> (f64, f64) {
        let a = &self.admittance;
        let (c, s) = (theta_ij.cos(), theta_ij.sin());
        let vv = v_i * v_j;
        let p = a.g_tt * v_j * v_j - vv * (a.g_to * c - a.b_to * s);
        let q = -a.b_tt * v_j * v_j + vv * (a.g_to * s + a.b_to * c);
        (p, q)
    }
}

/// One endpoint view of a line in a bus adjacency list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineEnd {
    pub line: usize,
    /// True when the bus is the line's `from` endpoint.
    pub at_from: bool,
}

/// Validated network: contiguously indexed buses, in-service generators and
/// lines, per-unit quantities on `base_mva`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
}

impl Network {
    /// Adjacency lists: for every bus, the line ends incident to it.
    pub fn neighbors(&self) -> Vec<Vec<LineEnd>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (li, line) in self.lines.iter().enumerate() {
            adj[line.from].push(LineEnd {
                line: li,
                at_from: true,
            });
            adj[line.to].push(LineEnd {
                line: li,
                at_from: false,
            });
        }
        adj
    }

    /// Buses with nonzero real load (the candidate charging sites).
    pub fn load_buses(&self) -> Vec<usize> {
        (0..self.buses.len())
            .filter(|&i| self.buses[i].load_p != 0.0)
            .collect()
    }

    /// Generators indexed per bus.
    pub fn generators_at(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.buses.len()];
        for (gi, g) in self.generators.iter().enumerate() {
            at[g.bus].push(gi);
        }
        at
    }

    /// Internal index of an original bus id, if present.
    pub fn index_of(&self, original_id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == original_id)
    }

    pub fn total_load_p(&self) -> f64 {
        self.buses.iter().map(|b| b.load_p).sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.buses.len();
        if n == 0 {
            return false;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for end in &adj[u] {
                let line = &self.lines[end.line];
                let v = if end.at_from { line.to } else { line.from };
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }
}
