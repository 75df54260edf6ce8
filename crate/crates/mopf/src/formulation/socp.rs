//! The cone program over lifted voltage products.

use super::instance::{FormulationError, MopfInstance, ObjectiveKind};
use crate::conic::{ConeBlock, ConeCoord, ConeKind, ConicProgram, LinearRow};

/// Dense variable numbering of the multi-period cone program.
///
/// Variables are laid out period-major so that the only rows crossing a
/// period boundary are the storage recurrences; the factorization then sees
/// a block-banded system. One period block holds, in order:
///
/// ```text
///   p_g, q_g            (n_gen each)
///   c_ii                 (n_bus)
///   c_ij, s_ij           (n_line each)
///   p_from, q_from, p_to, q_to   (n_line each)
///   a, b, stock          (n_site each; `stock` is the boundary *entering*
///                         the period)
///   epigraph             (one per generator with quadratic cost)
/// ```
///
/// plus `n_site` trailing stocks for the final boundary. Total:
/// `T * (2 n_gen + n_bus + 6 n_line + 3 n_site + n_quad) + n_site`.
#[derive(Debug, Clone)]
pub struct VariableIndex {
    pub horizon: usize,
    pub n_gen: usize,
    pub n_bus: usize,
    pub n_line: usize,
    pub n_site: usize,
    /// Generator indices with a strictly quadratic cost term.
    pub quad_gens: Vec<usize>,
    quad_pos: Vec<Option<usize>>,
    stride: usize,
}

impl VariableIndex {
    pub fn new(instance: &MopfInstance) -> Self {
        let n_gen = instance.network.generators.len();
        let n_bus = instance.network.buses.len();
        let n_line = instance.network.lines.len();
        let n_site = instance.sites.len();
        let quad_gens: Vec<usize> = instance
            .network
            .generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.cost.c2 > 0.0)
            .map(|(i, _)| i)
            .collect();
        let mut quad_pos = vec![None; n_gen];
        for (k, &g) in quad_gens.iter().enumerate() {
            quad_pos[g] = Some(k);
        }
        let stride = 2 * n_gen + n_bus + 6 * n_line + 3 * n_site + quad_gens.len();
        VariableIndex {
            horizon: instance.horizon,
            n_gen,
            n_bus,
            n_line,
            n_site,
            quad_gens,
            quad_pos,
            stride,
        }
    }

    pub fn total(&self) -> usize {
        self.horizon * self.stride + self.n_site
    }

    fn block(&self, t: usize) -> usize {
        t * self.stride
    }

    pub fn p_gen(&self, g: usize, t: usize) -> usize {
        self.block(t) + g
    }
    pub fn q_gen(&self, g: usize, t: usize) -> usize {
        self.block(t) + self.n_gen + g
    }
    pub fn c_bus(&self, b: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + b
    }
    pub fn c_line(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + l
    }
    pub fn s_line(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + self.n_line + l
    }
    pub fn p_from(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 2 * self.n_line + l
    }
    pub fn q_from(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 3 * self.n_line + l
    }
    pub fn p_to(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 4 * self.n_line + l
    }
    pub fn q_to(&self, l: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 5 * self.n_line + l
    }
    pub fn charge(&self, site: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 6 * self.n_line + site
    }
    pub fn discharge(&self, site: usize, t: usize) -> usize {
        self.block(t) + 2 * self.n_gen + self.n_bus + 6 * self.n_line + self.n_site + site
    }
    /// Stock at boundary `t` (entering period `t`); `t` may equal the
    /// horizon for the terminal boundary.
    pub fn stock(&self, site: usize, t: usize) -> usize {
        if t < self.horizon {
            self.block(t) + 2 * self.n_gen + self.n_bus + 6 * self.n_line + 2 * self.n_site + site
        } else {
            self.horizon * self.stride + site
        }
    }
    /// Cost epigraph variable of quadratic generator `g`, if it has one.
    pub fn epigraph(&self, g: usize, t: usize) -> Option<usize> {
        self.quad_pos[g].map(|k| {
            self.block(t) + 2 * self.n_gen + self.n_bus + 6 * self.n_line + 3 * self.n_site + k
        })
    }
}

/// Builds the cone program of an instance according to its objective
/// selector and optional emission cap.
pub fn build_socp(instance: &MopfInstance) -> Result<ConicProgram, FormulationError> {
    let idx = VariableIndex::new(instance);
    build_socp_indexed(instance, &idx)
}

/// Like [`build_socp`] but with a caller-provided index (reused across
/// repeated builds in sweeps).
pub fn build_socp_indexed(
    instance: &MopfInstance,
    idx: &VariableIndex,
) -> Result<ConicProgram, FormulationError> {
    let net = &instance.network;
    let horizon = instance.horizon;
    let needs_emission =
        instance.emission_cap_kg.is_some() || instance.objective == ObjectiveKind::Emission;
    if needs_emission {
        if instance.emissions.is_none() {
            return Err(FormulationError::MissingEmissions);
        }
        if instance.baseline.is_none() {
            return Err(FormulationError::MissingBaseline);
        }
    }

    let mut p = ConicProgram::with_vars(idx.total());
    // Names for solution dumps.
    for t in 0..horizon {
        for g in 0..idx.n_gen {
            p.var_names[idx.p_gen(g, t)] = format!("pg{g}_t{t}");
            p.var_names[idx.q_gen(g, t)] = format!("qg{g}_t{t}");
        }
        for b in 0..idx.n_bus {
            p.var_names[idx.c_bus(b, t)] = format!("cb{b}_t{t}");
        }
        for l in 0..idx.n_line {
            p.var_names[idx.c_line(l, t)] = format!("cl{l}_t{t}");
            p.var_names[idx.s_line(l, t)] = format!("sl{l}_t{t}");
            p.var_names[idx.p_from(l, t)] = format!("pf{l}_t{t}");
            p.var_names[idx.q_from(l, t)] = format!("qf{l}_t{t}");
            p.var_names[idx.p_to(l, t)] = format!("pt{l}_t{t}");
            p.var_names[idx.q_to(l, t)] = format!("qt{l}_t{t}");
        }
        for s in 0..idx.n_site {
            p.var_names[idx.charge(s, t)] = format!("a{s}_t{t}");
            p.var_names[idx.discharge(s, t)] = format!("b{s}_t{t}");
            p.var_names[idx.stock(s, t)] = format!("soc{s}_t{t}");
        }
        for (k, &g) in idx.quad_gens.iter().enumerate() {
            let _ = k;
            p.var_names[idx.epigraph(g, t).unwrap()] = format!("cost{g}_t{t}");
        }
    }
    for s in 0..idx.n_site {
        p.var_names[idx.stock(s, horizon)] = format!("soc{s}_t{horizon}");
    }

    // Variable bounds.
    for t in 0..horizon {
        for (g, gen) in net.generators.iter().enumerate() {
            p.lower[idx.p_gen(g, t)] = gen.p_min;
            p.upper[idx.p_gen(g, t)] = gen.p_max;
            p.lower[idx.q_gen(g, t)] = gen.q_min;
            p.upper[idx.q_gen(g, t)] = gen.q_max;
            if let Some(y) = idx.epigraph(g, t) {
                p.lower[y] = 0.0;
            }
        }
        for (b, bus) in net.buses.iter().enumerate() {
            p.lower[idx.c_bus(b, t)] = bus.v_min * bus.v_min;
            p.upper[idx.c_bus(b, t)] = bus.v_max * bus.v_max;
        }
        for (l, line) in net.lines.iter().enumerate() {
            let (bi, bj) = (&net.buses[line.from], &net.buses[line.to]);
            let vv_max = bi.v_max * bj.v_max;
            p.lower[idx.c_line(l, t)] = bi.v_min * bj.v_min * line.angle_max.cos();
            p.upper[idx.c_line(l, t)] = vv_max;
            let s_bound = vv_max * line.angle_max.sin();
            p.lower[idx.s_line(l, t)] = -s_bound;
            p.upper[idx.s_line(l, t)] = s_bound;
        }
        for (s, site) in instance.sites.iter().enumerate() {
            p.lower[idx.charge(s, t)] = site.charge_min.as_ref().map_or(0.0, |v| v[t]);
            p.upper[idx.charge(s, t)] = site.charge_max[t];
            p.lower[idx.discharge(s, t)] = site.discharge_min.as_ref().map_or(0.0, |v| v[t]);
            p.upper[idx.discharge(s, t)] = site.discharge_max[t];
            let soc = idx.stock(s, t);
            if t == 0 {
                p.lower[soc] = site.initial;
                p.upper[soc] = site.initial;
            } else {
                p.lower[soc] = site.stock_min[t];
                p.upper[soc] = site.stock_max[t];
            }
        }
    }
    for (s, site) in instance.sites.iter().enumerate() {
        let soc = idx.stock(s, horizon);
        p.lower[soc] = site.initial;
        p.upper[soc] = site.initial;
    }

    // Site lookup per bus.
    let mut site_at = vec![None; idx.n_bus];
    for (s, site) in instance.sites.iter().enumerate() {
        site_at[site.bus] = Some(s);
    }
    let gens_at = net.generators_at();
    let adjacency = net.neighbors();

    // Balance rows.
    for t in 0..horizon {
        for (b, bus) in net.buses.iter().enumerate() {
            let mut active = LinearRow::new().rhs(instance.loads.p[b][t]);
            let mut reactive = LinearRow::new().rhs(instance.loads.q[b][t]);
            for &g in &gens_at[b] {
                active = active.term(idx.p_gen(g, t), 1.0);
                reactive = reactive.term(idx.q_gen(g, t), 1.0);
            }
            if let Some(s) = site_at[b] {
                active = active
                    .term(idx.charge(s, t), -1.0)
                    .term(idx.discharge(s, t), instance.sites[s].efficiency);
            }
            if bus.shunt_g != 0.0 {
                active = active.term(idx.c_bus(b, t), -bus.shunt_g);
            }
            if bus.shunt_b != 0.0 {
                reactive = reactive.term(idx.c_bus(b, t), bus.shunt_b);
            }
            for end in &adjacency[b] {
                if end.at_from {
                    active = active.term(idx.p_from(end.line, t), -1.0);
                    reactive = reactive.term(idx.q_from(end.line, t), -1.0);
                } else {
                    active = active.term(idx.p_to(end.line, t), -1.0);
                    reactive = reactive.term(idx.q_to(end.line, t), -1.0);
                }
            }
            p.eq_rows.push(active);
            p.eq_rows.push(reactive);
        }

        // Flow definition rows.
        for (l, line) in net.lines.iter().enumerate() {
            let a = &line.admittance;
            let (cb_i, cb_j) = (idx.c_bus(line.from, t), idx.c_bus(line.to, t));
            let (cl, sl) = (idx.c_line(l, t), idx.s_line(l, t));
            p.eq_rows.push(
                LinearRow::new()
                    .term(idx.p_from(l, t), 1.0)
                    .term(cb_i, -a.g_ff)
                    .term(cl, a.g_from)
                    .term(sl, -a.b_from),
            );
            p.eq_rows.push(
                LinearRow::new()
                    .term(idx.q_from(l, t), 1.0)
                    .term(cb_i, a.b_ff)
                    .term(cl, -a.b_from)
                    .term(sl, -a.g_from),
            );
            p.eq_rows.push(
                LinearRow::new()
                    .term(idx.p_to(l, t), 1.0)
                    .term(cb_j, -a.g_tt)
                    .term(cl, a.g_to)
                    .term(sl, a.b_to),
            );
            p.eq_rows.push(
                LinearRow::new()
                    .term(idx.q_to(l, t), 1.0)
                    .term(cb_j, a.b_tt)
                    .term(cl, -a.b_to)
                    .term(sl, a.g_to),
            );
        }

        // Storage recurrences.
        for (s, site) in instance.sites.iter().enumerate() {
            p.eq_rows.push(
                LinearRow::new()
                    .term(idx.stock(s, t + 1), 1.0)
                    .term(idx.stock(s, t), -1.0)
                    .term(idx.charge(s, t), -site.efficiency)
                    .term(idx.discharge(s, t), 1.0)
                    .rhs(-site.energy_need[t]),
            );
        }
    }

    // Cones: voltage-product consistency and thermal limits.
    for t in 0..horizon {
        for (l, line) in net.lines.iter().enumerate() {
            p.cones.push(ConeBlock {
                kind: ConeKind::Rotated,
                coords: vec![
                    ConeCoord::var(idx.c_bus(line.from, t)),
                    ConeCoord::var(idx.c_bus(line.to, t)),
                    ConeCoord::scaled(idx.c_line(l, t), std::f64::consts::SQRT_2),
                    ConeCoord::scaled(idx.s_line(l, t), std::f64::consts::SQRT_2),
                ],
            });
            if line.s_max.is_finite() {
                p.cones.push(ConeBlock {
                    kind: ConeKind::Soc,
                    coords: vec![
                        ConeCoord::constant(line.s_max),
                        ConeCoord::var(idx.p_from(l, t)),
                        ConeCoord::var(idx.q_from(l, t)),
                    ],
                });
                p.cones.push(ConeBlock {
                    kind: ConeKind::Soc,
                    coords: vec![
                        ConeCoord::constant(line.s_max),
                        ConeCoord::var(idx.p_to(l, t)),
                        ConeCoord::var(idx.q_to(l, t)),
                    ],
                });
            }
        }
        // Quadratic cost epigraphs: y >= c2 p^2 as 2 y (1/(2 c2)) >= p^2.
        for &g in &idx.quad_gens {
            let c2 = net.generators[g].cost.c2;
            p.cones.push(ConeBlock {
                kind: ConeKind::Rotated,
                coords: vec![
                    ConeCoord::var(idx.epigraph(g, t).unwrap()),
                    ConeCoord::constant(1.0 / (2.0 * c2)),
                    ConeCoord::var(idx.p_gen(g, t)),
                ],
            });
        }
    }

    // Objective and emission accounting.
    match instance.objective {
        ObjectiveKind::Cost => {
            for t in 0..horizon {
                for (g, gen) in net.generators.iter().enumerate() {
                    if let Some(y) = idx.epigraph(g, t) {
                        p.objective[y] += 1.0;
                    }
                    p.objective[idx.p_gen(g, t)] += gen.cost.c1;
                    p.objective_constant += gen.cost.c0;
                }
            }
        }
        ObjectiveKind::Emission => {
            let e = instance.emissions.as_ref().unwrap();
            let baseline = instance.baseline.as_ref().unwrap();
            for t in 0..horizon {
                let w = e.values[t] * net.base_mva;
                for g in 0..idx.n_gen {
                    p.objective[idx.p_gen(g, t)] += w;
                    p.objective_constant -= w * baseline[g][t];
                }
            }
        }
    }
    if let Some(cap) = instance.emission_cap_kg {
        let e = instance.emissions.as_ref().unwrap();
        let baseline = instance.baseline.as_ref().unwrap();
        let mut row = LinearRow::new();
        let mut rhs = cap;
        for t in 0..horizon {
            let w = e.values[t] * net.base_mva;
            for g in 0..idx.n_gen {
                row = row.term(idx.p_gen(g, t), w);
                rhs += w * baseline[g][t];
            }
        }
        p.le_rows.push(row.rhs(rhs));
    }

    Ok(p)
}
