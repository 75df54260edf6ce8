//! Consistency residuals of relaxation solutions and the lifting map from
//! polar points into the relaxation's variable space.

use super::instance::MopfInstance;
use super::socp::VariableIndex;

/// Per-line, per-period slack of the voltage-product identity
/// `rho = c_ii c_jj - (c_ij^2 + s_ij^2)`; zero means the relaxation is
/// exact on that line.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `residuals[line][t]`.
    pub residuals: Vec<Vec<f64>>,
    pub max: f64,
    /// Most negative residual; a markedly negative value means the point
    /// violates the cone itself.
    pub min: f64,
    pub mean: f64,
    /// Largest product scale, the exactness reference.
    pub scale: f64,
    /// True when every |residual| <= 1e-6 * scale.
    pub exact: bool,
}

/// Evaluates the consistency residuals of a relaxation primal vector.
pub fn consistency_residuals(
    instance: &MopfInstance,
    idx: &VariableIndex,
    primal: &[f64],
) -> ResidualReport {
    let n_line = instance.network.lines.len();
    let horizon = instance.horizon;
    let mut residuals = vec![vec![0.0; horizon]; n_line];
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut scale = 0.0f64;
    for (l, line) in instance.network.lines.iter().enumerate() {
        for t in 0..horizon {
            let cii = primal[idx.c_bus(line.from, t)];
            let cjj = primal[idx.c_bus(line.to, t)];
            let cl = primal[idx.c_line(l, t)];
            let sl = primal[idx.s_line(l, t)];
            let rho = cii * cjj - (cl * cl + sl * sl);
            residuals[l][t] = rho;
            max = max.max(rho);
            min = min.min(rho);
            sum += rho;
            scale = scale.max(cii * cjj);
        }
    }
    let count = (n_line * horizon).max(1) as f64;
    let (max, min) = if n_line == 0 { (0.0, 0.0) } else { (max, min) };
    let tol = 1e-6 * scale.max(1e-12);
    ResidualReport {
        residuals,
        max,
        min,
        mean: sum / count,
        scale,
        exact: max <= tol && min >= -tol,
    }
}

/// Lifts a single-period polar point into the relaxation variables of
/// period `t`, writing into `primal` (length `idx.total()`).
///
/// Flows are evaluated from the line model, so a point satisfying the polar
/// equations maps onto a point satisfying every linear row of the cone
/// program with the consistency cones tight.
#[allow(clippy::too_many_arguments)]
pub fn lift_period_point(
    instance: &MopfInstance,
    idx: &VariableIndex,
    t: usize,
    v: &[f64],
    theta: &[f64],
    p_gen: &[f64],
    q_gen: &[f64],
    primal: &mut [f64],
) {
    let net = &instance.network;
    for b in 0..net.buses.len() {
        primal[idx.c_bus(b, t)] = v[b] * v[b];
    }
    for (l, line) in net.lines.iter().enumerate() {
        let d = theta[line.from] - theta[line.to];
        primal[idx.c_line(l, t)] = v[line.from] * v[line.to] * d.cos();
        primal[idx.s_line(l, t)] = -v[line.from] * v[line.to] * d.sin();
        let (pf, qf) = line.flow_from(v[line.from], v[line.to], d);
        let (pt, qt) = line.flow_to(v[line.from], v[line.to], d);
        primal[idx.p_from(l, t)] = pf;
        primal[idx.q_from(l, t)] = qf;
        primal[idx.p_to(l, t)] = pt;
        primal[idx.q_to(l, t)] = qt;
    }
    for g in 0..net.generators.len() {
        primal[idx.p_gen(g, t)] = p_gen[g];
        primal[idx.q_gen(g, t)] = q_gen[g];
        if let Some(y) = idx.epigraph(g, t) {
            let c2 = net.generators[g].cost.c2;
            primal[y] = c2 * p_gen[g] * p_gen[g];
        }
    }
}
