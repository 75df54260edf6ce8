//! Conic program container and its lowering to solver standard form.
//!
//! A [`ConicProgram`] keeps the modeller's view: named variables with box
//! bounds, linear equality and inequality rows, and cone blocks whose
//! coordinates are scaled variables or constants. [`lower`](ConicProgram::lower)
//! rewrites everything into the solver normal form
//!
//! ```text
//!   minimize    c'x
//!   subject to  A x = b
//!               G x + s = h,   s in K
//! ```
//!
//! where `K` stacks a nonnegative block followed by second-order cones.
//! Rotated cones are mapped onto plain second-order cones during lowering
//! via the isometry `(u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w)`.

use crate::linalg::CscMatrix;
use thiserror::Error;

/// One coordinate of a cone block: `coeff * x[var]`, or the constant `coeff`
/// when `var` is `None`.
#[derive(Debug, Clone, Copy)]
pub struct ConeCoord {
    pub var: Option<usize>,
    pub coeff: f64,
}

impl ConeCoord {
    pub fn var(var: usize) -> Self {
        ConeCoord {
            var: Some(var),
            coeff: 1.0,
        }
    }
    pub fn scaled(var: usize, coeff: f64) -> Self {
        ConeCoord {
            var: Some(var),
            coeff,
        }
    }
    pub fn constant(c: f64) -> Self {
        ConeCoord {
            var: None,
            coeff: c,
        }
    }
}

/// Cone family of a [`ConeBlock`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// `x0 >= || (x1..) ||`
    Soc,
    /// `2 x0 x1 >= || (x2..) ||^2`, `x0, x1 >= 0`
    Rotated,
}

#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub coords: Vec<ConeCoord>,
}

/// A sparse linear row `sum coeff_k x[var_k]  (= | <=)  rhs`.
#[derive(Debug, Clone, Default)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn term(mut self, var: usize, coeff: f64) -> Self {
        self.terms.push((var, coeff));
        self
    }
    pub fn rhs(mut self, rhs: f64) -> Self {
        self.rhs = rhs;
        self
    }
}

/// Modeller-level conic program.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub var_names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub eq_rows: Vec<LinearRow>,
    pub le_rows: Vec<LinearRow>,
    pub cones: Vec<ConeBlock>,
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("cone block references variable {var} but the program has {nvars} variables")]
    BadConeVar { var: usize, nvars: usize },
    #[error("row references variable {var} but the program has {nvars} variables")]
    BadRowVar { var: usize, nvars: usize },
    #[error("variable {0} has lower bound above upper bound")]
    EmptyBox(usize),
    #[error("cone block {0} has fewer than two coordinates")]
    ConeTooSmall(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl ConicProgram {
    pub fn with_vars(n: usize) -> Self {
        ConicProgram {
            var_names: (0..n).map(|i| format!("x{i}")).collect(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            objective: vec![0.0; n],
            objective_constant: 0.0,
            eq_rows: Vec::new(),
            le_rows: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> usize {
        let i = self.num_vars();
        self.var_names.push(name.into());
        self.lower.push(lb);
        self.upper.push(ub);
        self.objective.push(0.0);
        i
    }

    /// Checks structural consistency: index ranges, box bounds, cone arity.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        for (bi, block) in self.cones.iter().enumerate() {
            if block.coords.len() < 2 {
                return Err(ProgramError::ConeTooSmall(bi));
            }
            for c in &block.coords {
                if let Some(v) = c.var {
                    if v >= n {
                        return Err(ProgramError::BadConeVar { var: v, nvars: n });
                    }
                }
            }
        }
        for row in self.eq_rows.iter().chain(self.le_rows.iter()) {
            for &(v, _) in &row.terms {
                if v >= n {
                    return Err(ProgramError::BadRowVar { var: v, nvars: n });
                }
            }
        }
        for i in 0..n {
            if self.lower[i] > self.upper[i] + 1e-12 {
                return Err(ProgramError::EmptyBox(i));
            }
        }
        Ok(())
    }

    /// Lowers the program to solver standard form.
    pub fn lower(&self) -> Result<StandardForm, ProgramError> {
        self.validate()?;
        let n = self.num_vars();

        let mut eq_trip = Vec::new();
        let mut b = Vec::new();
        for row in &self.eq_rows {
            let r = b.len();
            for &(v, co) in &row.terms {
                eq_trip.push((r, v, co));
            }
            b.push(row.rhs);
        }
        // Equal box bounds become equality rows.
        for i in 0..n {
            if self.lower[i].is_finite() && self.lower[i] == self.upper[i] {
                let r = b.len();
                eq_trip.push((r, i, 1.0));
                b.push(self.lower[i]);
            }
        }

        let mut g_trip = Vec::new();
        let mut h = Vec::new();
        // Nonnegative block: le rows first, then finite one-sided bounds.
        for row in &self.le_rows {
            let r = h.len();
            for &(v, co) in &row.terms {
                g_trip.push((r, v, co));
            }
            h.push(row.rhs);
        }
        for i in 0..n {
            if self.lower[i] == self.upper[i] {
                continue; // handled as equality
            }
            if self.lower[i].is_finite() {
                let r = h.len();
                g_trip.push((r, i, -1.0));
                h.push(-self.lower[i]);
            }
            if self.upper[i].is_finite() {
                let r = h.len();
                g_trip.push((r, i, 1.0));
                h.push(self.upper[i]);
            }
        }
        let nonneg_dim = h.len();

        // Cone blocks. Each coordinate k of a block becomes a row
        // `s_k = coord_k`, i.e. `-coord + s = 0` in `G x + s = h` terms.
        let mut soc_dims = Vec::new();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for block in &self.cones {
            match block.kind {
                ConeKind::Soc => {
                    for c in &block.coords {
                        let r = h.len();
                        match c.var {
                            Some(v) => {
                                g_trip.push((r, v, -c.coeff));
                                h.push(0.0);
                            }
                            None => h.push(c.coeff),
                        }
                    }
                    soc_dims.push(block.coords.len());
                }
                ConeKind::Rotated => {
                    // (u, v, w..) rotated  ->  ((u+v)/sqrt2, (u-v)/sqrt2, w..) soc
                    let u = block.coords[0];
                    let v = block.coords[1];
                    for (sign_v, _) in [(1.0, "plus"), (-1.0, "minus")] {
                        let r = h.len();
                        let mut cst = 0.0;
                        match u.var {
                            Some(uv) => g_trip.push((r, uv, -u.coeff * inv_sqrt2)),
                            None => cst += u.coeff * inv_sqrt2,
                        }
                        match v.var {
                            Some(vv) => g_trip.push((r, vv, -v.coeff * inv_sqrt2 * sign_v)),
                            None => cst += v.coeff * inv_sqrt2 * sign_v,
                        }
                        h.push(cst);
                    }
                    for c in &block.coords[2..] {
                        let r = h.len();
                        match c.var {
                            Some(vv) => {
                                g_trip.push((r, vv, -c.coeff));
                                h.push(0.0);
                            }
                            None => h.push(c.coeff),
                        }
                    }
                    soc_dims.push(block.coords.len());
                }
            }
        }

        Ok(StandardForm {
            c: self.objective.clone(),
            obj_constant: self.objective_constant,
            a_eq: CscMatrix::from_triplets(b.len(), n, &eq_trip),
            b,
            g: CscMatrix::from_triplets(h.len(), n, &g_trip),
            h,
            nonneg_dim,
            soc_dims,
        })
    }

    /// Serializes the program (in lowered standard form) to the documented
    /// sparse text format.
    pub fn export_text(&self) -> Result<String, ProgramError> {
        let sf = self.lower()?;
        let mut out = String::new();
        out.push_str("mopf-conic v1\n");
        out.push_str(&format!("vars {}\n", sf.c.len()));
        out.push_str(&format!("obj_constant {:.17e}\n", sf.obj_constant));
        for (i, &ci) in sf.c.iter().enumerate() {
            if ci != 0.0 {
                out.push_str(&format!("obj {i} {ci:.17e}\n"));
            }
        }
        out.push_str(&format!("eq_rows {}\n", sf.b.len()));
        for (i, &bi) in sf.b.iter().enumerate() {
            if bi != 0.0 {
                out.push_str(&format!("b {i} {bi:.17e}\n"));
            }
        }
        for c in 0..sf.a_eq.ncols {
            for p in sf.a_eq.colptr[c]..sf.a_eq.colptr[c + 1] {
                out.push_str(&format!(
                    "A {} {} {:.17e}\n",
                    sf.a_eq.rowind[p], c, sf.a_eq.values[p]
                ));
            }
        }
        out.push_str(&format!("cone_rows {}\n", sf.h.len()));
        for (i, &hi) in sf.h.iter().enumerate() {
            if hi != 0.0 {
                out.push_str(&format!("h {i} {hi:.17e}\n"));
            }
        }
        for c in 0..sf.g.ncols {
            for p in sf.g.colptr[c]..sf.g.colptr[c + 1] {
                out.push_str(&format!(
                    "G {} {} {:.17e}\n",
                    sf.g.rowind[p], c, sf.g.values[p]
                ));
            }
        }
        out.push_str(&format!("cone nonneg {}\n", sf.nonneg_dim));
        for d in &sf.soc_dims {
            out.push_str(&format!("cone soc {d}\n"));
        }
        Ok(out)
    }
}

/// Solver standard form; see the module docs.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub c: Vec<f64>,
    pub obj_constant: f64,
    pub a_eq: CscMatrix,
    pub b: Vec<f64>,
    pub g: CscMatrix,
    pub h: Vec<f64>,
    pub nonneg_dim: usize,
    pub soc_dims: Vec<usize>,
}

impl StandardForm {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Parses the sparse text format produced by
    /// [`ConicProgram::export_text`].
    pub fn parse_text(text: &str) -> Result<StandardForm, ProgramError> {
        let err = |line: usize, msg: &str| ProgramError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (ln, first) = lines
            .next()
            .ok_or_else(|| err(0, "empty input"))?;
        if first.trim() != "mopf-conic v1" {
            return Err(err(ln + 1, "expected header `mopf-conic v1`"));
        }
        let mut nvars = 0usize;
        let mut obj_constant = 0.0;
        let mut c: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut h: Vec<f64> = Vec::new();
        let mut a_trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut g_trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut nonneg_dim = 0usize;
        let mut soc_dims = Vec::new();

        for (ln0, raw) in lines {
            let ln = ln0 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap();
            let next_usize = |it: &mut std::str::SplitWhitespace| -> Result<usize, ProgramError> {
                it.next()
                    .ok_or_else(|| err(ln, "missing field"))?
                    .parse()
                    .map_err(|_| err(ln, "bad integer"))
            };
            let next_f64 = |it: &mut std::str::SplitWhitespace| -> Result<f64, ProgramError> {
                it.next()
                    .ok_or_else(|| err(ln, "missing field"))?
                    .parse()
                    .map_err(|_| err(ln, "bad number"))
            };
            match tag {
                "vars" => {
                    nvars = next_usize(&mut it)?;
                    c = vec![0.0; nvars];
                }
                "obj_constant" => obj_constant = next_f64(&mut it)?,
                "obj" => {
                    let i = next_usize(&mut it)?;
                    let v = next_f64(&mut it)?;
                    if i >= nvars {
                        return Err(err(ln, "obj index out of range"));
                    }
                    c[i] = v;
                }
                "eq_rows" => b = vec![0.0; next_usize(&mut it)?],
                "cone_rows" => h = vec![0.0; next_usize(&mut it)?],
                "b" => {
                    let i = next_usize(&mut it)?;
                    let v = next_f64(&mut it)?;
                    if i >= b.len() {
                        return Err(err(ln, "b index out of range"));
                    }
                    b[i] = v;
                }
                "h" => {
                    let i = next_usize(&mut it)?;
                    let v = next_f64(&mut it)?;
                    if i >= h.len() {
                        return Err(err(ln, "h index out of range"));
                    }
                    h[i] = v;
                }
                "A" => {
                    let r = next_usize(&mut it)?;
                    let col = next_usize(&mut it)?;
                    let v = next_f64(&mut it)?;
                    if r >= b.len() || col >= nvars {
                        return Err(err(ln, "A triplet out of range"));
                    }
                    a_trip.push((r, col, v));
                }
                "G" => {
                    let r = next_usize(&mut it)?;
                    let col = next_usize(&mut it)?;
                    let v = next_f64(&mut it)?;
                    if r >= h.len() || col >= nvars {
                        return Err(err(ln, "G triplet out of range"));
                    }
                    g_trip.push((r, col, v));
                }
                "cone" => {
                    let kind = it.next().ok_or_else(|| err(ln, "missing cone kind"))?;
                    let d = next_usize(&mut it)?;
                    match kind {
                        "nonneg" => nonneg_dim = d,
                        "soc" => soc_dims.push(d),
                        other => {
                            return Err(err(ln, &format!("unknown cone kind `{other}`")));
                        }
                    }
                }
                other => return Err(err(ln, &format!("unknown record `{other}`"))),
            }
        }
        let total: usize = nonneg_dim + soc_dims.iter().sum::<usize>();
        if total != h.len() {
            return Err(err(0, "cone dimensions do not cover the cone rows"));
        }
        Ok(StandardForm {
            c,
            obj_constant,
            a_eq: CscMatrix::from_triplets(b.len(), nvars, &a_trip),
            b,
            g: CscMatrix::from_triplets(h.len(), nvars, &g_trip),
            h,
            nonneg_dim,
            soc_dims,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_counts_rows() {
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", 0.0, 10.0);
        let y = p.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        let z = p.add_var("z", 2.0, 2.0);
        p.objective[x] = 1.0;
        p.eq_rows.push(LinearRow::new().term(x, 1.0).term(y, 1.0).rhs(4.0));
        p.le_rows.push(LinearRow::new().term(y, 2.0).rhs(8.0));
        p.cones.push(ConeBlock {
            kind: ConeKind::Soc,
            coords: vec![ConeCoord::constant(5.0), ConeCoord::var(x), ConeCoord::var(y)],
        });
        let _ = z;
        let sf = p.lower().unwrap();
        // eq: 1 explicit + 1 pinned variable
        assert_eq!(sf.b.len(), 2);
        // nonneg: 1 le row + 2 bounds of x
        assert_eq!(sf.nonneg_dim, 3);
        assert_eq!(sf.soc_dims, vec![3]);
        assert_eq!(sf.h.len(), 3 + 3);
    }

    #[test]
    fn export_import_round_trip() {
        let mut p = ConicProgram::with_vars(0);
        let x = p.add_var("x", 0.5, f64::INFINITY);
        let y = p.add_var("y", f64::NEG_INFINITY, 3.0);
        p.objective[x] = 2.0;
        p.objective[y] = -1.0;
        p.objective_constant = 7.0;
        p.eq_rows.push(LinearRow::new().term(x, 1.0).term(y, -1.0).rhs(0.25));
        p.cones.push(ConeBlock {
            kind: ConeKind::Rotated,
            coords: vec![
                ConeCoord::var(x),
                ConeCoord::constant(0.5),
                ConeCoord::var(y),
            ],
        });
        let text = p.export_text().unwrap();
        let sf = StandardForm::parse_text(&text).unwrap();
        let direct = p.lower().unwrap();
        assert_eq!(sf.c, direct.c);
        assert_eq!(sf.b, direct.b);
        assert_eq!(sf.h, direct.h);
        assert_eq!(sf.nonneg_dim, direct.nonneg_dim);
        assert_eq!(sf.soc_dims, direct.soc_dims);
        assert_eq!(sf.g.nnz(), direct.g.nnz());
    }
}
