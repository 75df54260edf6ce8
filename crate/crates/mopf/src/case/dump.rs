//! Canonical dumps: a key-value text form for golden tests and a case-file
//! serialization that re-parses to the same network.

use super::Network;

/// Key-value dump of the normalized network, stable across runs.
pub fn canonical_dump(network: &Network) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "network base_mva={} buses={} lines={} gens={}\n",
        network.base_mva,
        network.buses.len(),
        network.lines.len(),
        network.generators.len()
    ));
    for b in &network.buses {
        out.push_str(&format!(
            "bus id={} pd={:.9} qd={:.9} gsh={:.9} bsh={:.9} vmin={:.6} vmax={:.6}\n",
            b.id, b.load_p, b.load_q, b.shunt_g, b.shunt_b, b.v_min, b.v_max
        ));
    }
    for g in &network.generators {
        out.push_str(&format!(
            "gen bus={} pmin={:.9} pmax={:.9} qmin={:.9} qmax={:.9} c2={:.9} c1={:.9} c0={:.9}\n",
            network.buses[g.bus].id,
            g.p_min,
            g.p_max,
            g.q_min,
            g.q_max,
            g.cost.c2,
            g.cost.c1,
            g.cost.c0
        ));
    }
    for l in &network.lines {
        out.push_str(&format!(
            "line from={} to={} g_ij={:.9} b_ij={:.9} g_ji={:.9} b_ji={:.9} smax={} angmax={:.6}\n",
            network.buses[l.from].id,
            network.buses[l.to].id,
            l.admittance.g_from,
            l.admittance.b_from,
            l.admittance.g_to,
            l.admittance.b_to,
            if l.s_max.is_finite() {
                format!("{:.9}", l.s_max)
            } else {
                "inf".to_string()
            },
            l.angle_max
        ));
    }
    out
}

/// Serializes back to case-file text. Out-of-service rows were dropped at
/// parse time, so the output round-trips structurally.
pub fn to_case_text(network: &Network) -> String {
    let base = network.base_mva;
    let mut out = String::new();
    out.push_str("function mpc = network\nmpc.version = '2';\n");
    out.push_str(&format!("mpc.baseMVA = {base};\n"));

    out.push_str("mpc.bus = [\n");
    for b in &network.buses {
        out.push_str(&format!(
            "\t{}\t1\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t1\t1\t0\t1\t1\t{:.17e}\t{:.17e};\n",
            b.id,
            b.load_p * base,
            b.load_q * base,
            b.shunt_g * base,
            b.shunt_b * base,
            b.v_max,
            b.v_min
        ));
    }
    out.push_str("];\n");

    out.push_str("mpc.gen = [\n");
    for g in &network.generators {
        out.push_str(&format!(
            "\t{}\t0\t0\t{:.17e}\t{:.17e}\t1\t{}\t1\t{:.17e}\t{:.17e};\n",
            network.buses[g.bus].id,
            g.q_max * base,
            g.q_min * base,
            base,
            g.p_max * base,
            g.p_min * base
        ));
    }
    out.push_str("];\n");

    out.push_str("mpc.branch = [\n");
    for l in &network.lines {
        let rate = if l.s_max.is_finite() {
            l.s_max * base
        } else {
            0.0
        };
        let ang = l.angle_max.to_degrees();
        out.push_str(&format!(
            "\t{}\t{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t0\t0\t{:.17e}\t{:.17e}\t1\t{:.13}\t{:.13};\n",
            network.buses[l.from].id,
            network.buses[l.to].id,
            l.r,
            l.x,
            l.b_charge,
            rate,
            if l.tap == 1.0 { 0.0 } else { l.tap },
            l.shift.to_degrees(),
            -ang,
            ang
        ));
    }
    out.push_str("];\n");

    out.push_str("mpc.gencost = [\n");
    for g in &network.generators {
        out.push_str(&format!(
            "\t2\t0\t0\t3\t{:.17e}\t{:.17e}\t{:.17e};\n",
            g.cost.c2 / (base * base),
            g.cost.c1 / base,
            g.cost.c0
        ));
    }
    out.push_str("];\n");
    out
}
