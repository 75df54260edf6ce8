//! CSV rendering of sweep results.
//!
//! Frontier schema:
//! `cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,tag`
//! with empty cells where a value is unavailable (invalid points, or
//! percentage context not supplied). Hourly dumps carry
//! `period,gen_excl_ev,gen_for_ev,v2g_power` in MWh per period.

use super::{ParetoPoint, PipelineError};

/// Inputs for the percentage columns.
#[derive(Debug, Clone, Copy)]
pub struct ReportContext {
    pub no_ev_cost: f64,
    pub gasoline_g_per_mile: f64,
    pub total_miles: f64,
}

/// One rendered frontier row.
#[derive(Debug, Clone)]
pub struct FrontierRow {
    pub point: ParetoPoint,
    pub tag: &'static str,
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

/// Renders the frontier CSV; deterministic for identical inputs.
pub fn frontier_csv(
    rows: &[FrontierRow],
    ctx: Option<&ReportContext>,
) -> Result<String, PipelineError> {
    let mut out = String::from(
        "cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,tag\n",
    );
    for row in rows {
        let p = &row.point;
        let (cost_change, emission_change) = match (ctx, p.valid) {
            (Some(c), true) => {
                let (cc, ec) = super::percent_changes(
                    p.ub_cost,
                    c.no_ev_cost,
                    p.emission_kg,
                    c.gasoline_g_per_mile,
                    c.total_miles,
                )?;
                (cell(cc), cell(ec))
            }
            _ => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell(p.cap_kg),
            cell(p.ub_cost),
            cell(p.lb_cost),
            cell(p.emission_kg),
            cell(p.gap_pct),
            cost_change,
            emission_change,
            p.valid,
            row.tag
        ));
    }
    Ok(out)
}

/// Renders one point's hourly dump.
pub fn hourly_csv(point: &ParetoPoint) -> String {
    let mut out = String::from("period,gen_excl_ev,gen_for_ev,v2g_power\n");
    for t in 0..point.hourly.gen_excl_ev.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t,
            cell(point.hourly.gen_excl_ev[t]),
            cell(point.hourly.gen_for_ev[t]),
            cell(point.hourly.v2g_power[t])
        ));
    }
    out
}
