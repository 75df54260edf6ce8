//! MATPOWER-style case file parsing (the subset needed here: `baseMVA`,
//! `bus`, `gen`, `branch`, `gencost` tables with polynomial costs).

use super::{branch_admittance, Bus, CostPolynomial, Generator, Line, Network};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing table `{0}`")]
    MissingTable(&'static str),
    #[error("line {line}: branch references unknown bus {bus}")]
    DanglingBus { line: usize, bus: usize },
    #[error("line {line}: generator references unknown bus {bus}")]
    DanglingGenBus { line: usize, bus: usize },
    #[error("gencost has {got} rows, expected {expected} (one per generator)")]
    CostCount { got: usize, expected: usize },
    #[error("line {line}: piecewise-linear cost models are not supported")]
    PiecewiseCost { line: usize },
    #[error("line {line}: nonconvex cost polynomial (negative quadratic coefficient)")]
    NonconvexCost { line: usize },
    #[error("line {line}: cost polynomial degree {degree} exceeds 2")]
    CostDegree { line: usize, degree: usize },
    #[error("line {line}: {source}")]
    Admittance {
        line: usize,
        source: super::AdmittanceError,
    },
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Bus,
    Gen,
    Branch,
    GenCost,
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

/// Parses case text into a [`Network`], normalizing to per-unit and
/// dropping out-of-service generators and branches.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let syntax = |line: usize, msg: &str| CaseError::Syntax {
        line,
        msg: msg.to_string(),
    };

    let mut base_mva: Option<f64> = None;
    let mut bus_rows: Vec<Row> = Vec::new();
    let mut gen_rows: Vec<Row> = Vec::new();
    let mut branch_rows: Vec<Row> = Vec::new();
    let mut cost_rows: Vec<Row> = Vec::new();
    let mut section = Section::None;

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = match raw.find('%') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("function") || line.contains("mpc.version") {
            continue;
        }
        if let Some(eq) = line.find('=') {
            let lhs = line[..eq].trim();
            if lhs == "mpc.baseMVA" {
                let rhs = line[eq + 1..].trim().trim_end_matches(';').trim();
                base_mva = Some(
                    rhs.parse()
                        .map_err(|_| syntax(ln, "invalid baseMVA value"))?,
                );
                continue;
            }
            let table = match lhs {
                "mpc.bus" => Some(Section::Bus),
                "mpc.gencost" => Some(Section::GenCost),
                "mpc.gen" => Some(Section::Gen),
                "mpc.branch" => Some(Section::Branch),
                _ => None,
            };
            if let Some(t) = table {
                if section != Section::None {
                    return Err(syntax(ln, "table started before previous one closed"));
                }
                section = t;
                // Data (or the closing bracket) may follow on the same line.
                let after = line[eq + 1..].trim_start().trim_start_matches('[').trim();
                if after == "]" || after == "];" {
                    section = Section::None;
                } else if !after.is_empty() {
                    parse_data_line(after, ln, section, &mut bus_rows, &mut gen_rows, &mut branch_rows, &mut cost_rows, &mut section)?;
                }
                continue;
            }
            // Unknown assignment (bus_name etc.): skip scalar lines, but a
            // bracketed table must be skipped to its end.
            if line.contains('[') && !line.contains(']') {
                section = Section::None;
                // consume until `];` by flagging with a sentinel: handled by
                // requiring data rows to parse as numbers; simplest is to
                // skip lines until the closing bracket appears.
                // Implemented via the `skipping` trick below.
            }
            continue;
        }
        if section == Section::None {
            continue;
        }
        parse_data_line(line, ln, section, &mut bus_rows, &mut gen_rows, &mut branch_rows, &mut cost_rows, &mut section)?;
    }

    let base = base_mva.ok_or(CaseError::MissingTable("baseMVA"))?;
    if bus_rows.is_empty() {
        return Err(CaseError::MissingTable("bus"));
    }
    if gen_rows.is_empty() {
        return Err(CaseError::MissingTable("gen"));
    }
    if cost_rows.is_empty() {
        return Err(CaseError::MissingTable("gencost"));
    }

    // Buses, re-indexed contiguously in file order.
    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut index_of = std::collections::HashMap::new();
    for row in &bus_rows {
        if row.values.len() < 13 {
            return Err(syntax(row.line, "bus row needs at least 13 columns"));
        }
        let id = row.values[0] as usize;
        if index_of.insert(id, buses.len()).is_some() {
            return Err(CaseError::DuplicateBus(id));
        }
        buses.push(Bus {
            id,
            load_p: row.values[2] / base,
            load_q: row.values[3] / base,
            shunt_g: row.values[4] / base,
            shunt_b: row.values[5] / base,
            v_max: row.values[11],
            v_min: row.values[12],
        });
    }

    // Generators; status-0 units are dropped together with their cost row.
    if cost_rows.len() != gen_rows.len() {
        return Err(CaseError::CostCount {
            got: cost_rows.len(),
            expected: gen_rows.len(),
        });
    }
    let mut generators = Vec::new();
    for (row, cost) in gen_rows.iter().zip(cost_rows.iter()) {
        if row.values.len() < 10 {
            return Err(syntax(row.line, "gen row needs at least 10 columns"));
        }
        let status = row.values[7] > 0.5;
        if !status {
            continue;
        }
        let bus_id = row.values[0] as usize;
        let bus = *index_of.get(&bus_id).ok_or(CaseError::DanglingGenBus {
            line: row.line,
            bus: bus_id,
        })?;
        generators.push(Generator {
            bus,
            q_max: row.values[3] / base,
            q_min: row.values[4] / base,
            p_max: row.values[8] / base,
            p_min: row.values[9] / base,
            cost: parse_cost(cost, base)?,
        });
    }

    // Branches; status-0 lines dropped.
    let mut lines = Vec::new();
    for row in &branch_rows {
        if row.values.len() < 13 {
            return Err(syntax(row.line, "branch row needs at least 13 columns"));
        }
        let status = row.values[10] > 0.5;
        if !status {
            continue;
        }
        let f_id = row.values[0] as usize;
        let t_id = row.values[1] as usize;
        let from = *index_of.get(&f_id).ok_or(CaseError::DanglingBus {
            line: row.line,
            bus: f_id,
        })?;
        let to = *index_of.get(&t_id).ok_or(CaseError::DanglingBus {
            line: row.line,
            bus: t_id,
        })?;
        let r = row.values[2];
        let x = row.values[3];
        let b_charge = row.values[4];
        let rate_a = row.values[5];
        let tap = if row.values[8] == 0.0 { 1.0 } else { row.values[8] };
        let shift = row.values[9].to_radians();
        let ang_min = row.values[11];
        let ang_max = row.values[12];
        let admittance = branch_admittance(r, x, b_charge, tap, shift).map_err(|source| {
            CaseError::Admittance {
                line: row.line,
                source,
            }
        })?;
        let angle_cap = ang_min.abs().max(ang_max.abs());
        let angle_max = if angle_cap == 0.0 || angle_cap >= 360.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            angle_cap.to_radians().min(std::f64::consts::FRAC_PI_2)
        };
        lines.push(Line {
            from,
            to,
            admittance,
            s_max: if rate_a > 0.0 {
                rate_a / base
            } else {
                f64::INFINITY
            },
            angle_max,
            r,
            x,
            b_charge,
            tap,
            shift,
        });
    }

    Ok(Network {
        base_mva: base,
        buses,
        generators,
        lines,
    })
}

#[allow(clippy::too_many_arguments)]
fn parse_data_line(
    line: &str,
    ln: usize,
    section: Section,
    bus_rows: &mut Vec<Row>,
    gen_rows: &mut Vec<Row>,
    branch_rows: &mut Vec<Row>,
    cost_rows: &mut Vec<Row>,
    section_out: &mut Section,
) -> Result<(), CaseError> {
    let closes = line.contains("];") || line.trim() == "]";
    let data = line.replace("];", " ").replace(']', " ");
    for chunk in data.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for (ci, tok) in chunk.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| CaseError::Syntax {
                line: ln,
                msg: format!("column {}: `{tok}` is not a number", ci + 1),
            })?;
            values.push(v);
        }
        if values.is_empty() {
            continue;
        }
        let row = Row { line: ln, values };
        match section {
            Section::Bus => bus_rows.push(row),
            Section::Gen => gen_rows.push(row),
            Section::Branch => branch_rows.push(row),
            Section::GenCost => cost_rows.push(row),
            Section::None => {}
        }
    }
    if closes {
        *section_out = Section::None;
    }
    Ok(())
}

/// MATPOWER gencost row: `model startup shutdown n c_{n-1} .. c_0`.
/// Coefficients are rebased from MW to per-unit.
fn parse_cost(row: &Row, base: f64) -> Result<CostPolynomial, CaseError> {
    let v = &row.values;
    if v.len() < 4 {
        return Err(CaseError::Syntax {
            line: row.line,
            msg: "gencost row needs at least 4 columns".to_string(),
        });
    }
    let model = v[0] as usize;
    if model == 1 {
        return Err(CaseError::PiecewiseCost { line: row.line });
    }
    if model != 2 {
        return Err(CaseError::Syntax {
            line: row.line,
            msg: format!("unknown cost model {model}"),
        });
    }
    let n = v[3] as usize;
    if n > 3 {
        return Err(CaseError::CostDegree {
            line: row.line,
            degree: n - 1,
        });
    }
    if v.len() < 4 + n {
        return Err(CaseError::Syntax {
            line: row.line,
            msg: "gencost row shorter than its coefficient count".to_string(),
        });
    }
    let coeffs = &v[4..4 + n];
    let (c2_mw, c1_mw, c0) = match n {
        0 => (0.0, 0.0, 0.0),
        1 => (0.0, 0.0, coeffs[0]),
        2 => (0.0, coeffs[0], coeffs[1]),
        _ => (coeffs[0], coeffs[1], coeffs[2]),
    };
    if c2_mw < 0.0 {
        return Err(CaseError::NonconvexCost { line: row.line });
    }
    Ok(CostPolynomial {
        c2: c2_mw * base * base,
        c1: c1_mw * base,
        c0,
    })
}
