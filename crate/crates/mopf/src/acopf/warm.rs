//! Polar starting points recovered from relaxation solutions.

use crate::formulation::{MopfInstance, VariableIndex};

/// A polar starting point for one period, with the per-cycle angle
/// mismatches observed while propagating angles over a spanning tree.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// (line index, wrapped angle residual) for every non-tree line.
    pub cycle_residuals: Vec<(usize, f64)>,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r > std::f64::consts::PI {
        r -= two_pi;
    } else if r < -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

/// Recovers voltage magnitudes as `sqrt(c_ii)` and angles by spreading the
/// per-line angle estimates `atan2(-s_ij, c_ij)` over a spanning tree rooted
/// at the reference bus. On meshed networks the leftover mismatch of each
/// chord is reported, not treated as an error.
pub fn warm_start_from_socp(
    instance: &MopfInstance,
    idx: &VariableIndex,
    primal: &[f64],
    t: usize,
) -> WarmStart {
    let net = &instance.network;
    let n_bus = net.buses.len();
    let v: Vec<f64> = (0..n_bus)
        .map(|b| primal[idx.c_bus(b, t)].max(0.0).sqrt())
        .collect();

    let line_angle = |l: usize| -> f64 {
        let c = primal[idx.c_line(l, t)];
        let s = primal[idx.s_line(l, t)];
        // theta_i - theta_j for line l = (i, j).
        (-s).atan2(c)
    };

    let adjacency = net.neighbors();
    let mut theta = vec![0.0; n_bus];
    let mut seen = vec![false; n_bus];
    let mut in_tree = vec![false; net.lines.len()];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        for end in &adjacency[u] {
            let line = &net.lines[end.line];
            let other = if end.at_from { line.to } else { line.from };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            in_tree[end.line] = true;
            let d = line_angle(end.line);
            theta[other] = if end.at_from {
                theta[u] - d
            } else {
                theta[u] + d
            };
            queue.push_back(other);
        }
    }

    let cycle_residuals = net
        .lines
        .iter()
        .enumerate()
        .filter(|(l, _)| !in_tree[*l])
        .map(|(l, line)| {
            let measured = line_angle(l);
            let implied = theta[line.from] - theta[line.to];
            (l, wrap_angle(implied - measured))
        })
        .collect();

    let p_gen = (0..net.generators.len())
        .map(|g| primal[idx.p_gen(g, t)])
        .collect();
    let q_gen = (0..net.generators.len())
        .map(|g| primal[idx.q_gen(g, t)])
        .collect();

    WarmStart {
        v,
        theta,
        p_gen,
        q_gen,
        cycle_residuals,
    }
}
