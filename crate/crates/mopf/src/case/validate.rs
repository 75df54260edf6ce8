//! Network validation diagnostics.

use super::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    VoltageBoundOrder,
    GeneratorBoundOrder,
    NonconvexCost,
    BadFlowLimit,
    BadAngleLimit,
    DanglingReference,
    Disconnected,
    DuplicateBusId,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Checks every structural invariant and returns a diagnostic per violation;
/// an empty list means the network is well formed and connected.
pub fn validate(network: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Diagnostic>, kind, message: String| {
        out.push(Diagnostic { kind, message });
    };

    let mut seen = std::collections::HashSet::new();
    for bus in &network.buses {
        if !seen.insert(bus.id) {
            push(
                &mut out,
                DiagnosticKind::DuplicateBusId,
                format!("bus id {} appears more than once", bus.id),
            );
        }
        if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max) {
            push(
                &mut out,
                DiagnosticKind::VoltageBoundOrder,
                format!(
                    "bus {}: voltage bound order violated (vmin {}, vmax {})",
                    bus.id, bus.v_min, bus.v_max
                ),
            );
        }
    }

    let n = network.buses.len();
    for (gi, g) in network.generators.iter().enumerate() {
        if g.bus >= n {
            push(
                &mut out,
                DiagnosticKind::DanglingReference,
                format!("generator {gi} references bus index {} out of range", g.bus),
            );
            continue;
        }
        if g.p_min > g.p_max || g.q_min > g.q_max {
            push(
                &mut out,
                DiagnosticKind::GeneratorBoundOrder,
                format!("generator {gi} at bus {}: bound order violated", network.buses[g.bus].id),
            );
        }
        if !g.cost.is_convex() {
            push(
                &mut out,
                DiagnosticKind::NonconvexCost,
                format!("generator {gi}: negative quadratic cost coefficient"),
            );
        }
    }

    for (li, line) in network.lines.iter().enumerate() {
        if line.from >= n || line.to >= n {
            push(
                &mut out,
                DiagnosticKind::DanglingReference,
                format!("line {li} references a bus index out of range"),
            );
            continue;
        }
        if line.s_max <= 0.0 {
            push(
                &mut out,
                DiagnosticKind::BadFlowLimit,
                format!("line {li}: apparent-power limit must be positive"),
            );
        }
        if !(line.angle_max > 0.0 && line.angle_max <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            push(
                &mut out,
                DiagnosticKind::BadAngleLimit,
                format!("line {li}: angle limit must lie in (0, pi/2]"),
            );
        }
    }

    // Connectivity only makes sense once references are in range.
    if out.iter().all(|d| d.kind != DiagnosticKind::DanglingReference) && !network.is_connected() {
        push(
            &mut out,
            DiagnosticKind::Disconnected,
            "network graph is disconnected".to_string(),
        );
    }

    out
}
