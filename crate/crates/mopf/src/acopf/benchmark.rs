//! The uncoordinated reference schedule: every group starts charging at
//! midnight at full rate until the day's driving energy is stored.

use crate::formulation::MopfInstance;
use thiserror::Error;

/// A fixed charging schedule, per site and period, per-unit.
#[derive(Debug, Clone)]
pub struct ChargeSchedule {
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
    /// Notes for physically questionable trajectories (e.g. a group that
    /// drives before its first charging window).
    pub diagnostics: Vec<String>,
}

impl ChargeSchedule {
    pub fn column(&self, t: usize) -> (Vec<f64>, Vec<f64>) {
        (
            self.charge.iter().map(|row| row[t]).collect(),
            self.discharge.iter().map(|row| row[t]).collect(),
        )
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(
        "site {site}: charging windows cannot cover the daily demand ({remaining:.6} per-unit-hours short)"
    )]
    InsufficientWindows { site: usize, remaining: f64 },
}

/// Greedy earliest-possible charging: from midnight onward, each connected
/// period charges at the largest rate that fits the charger, the remaining
/// demand, and the battery headroom, until the stored energy covers the
/// day's consumption. Feed-in stays zero, so the terminal stock matches the
/// initial one by construction.
pub fn benchmark_charging(instance: &MopfInstance) -> Result<ChargeSchedule, BenchmarkError> {
    let horizon = instance.horizon;
    let mut charge = Vec::with_capacity(instance.sites.len());
    let mut diagnostics = Vec::new();

    for (si, site) in instance.sites.iter().enumerate() {
        let total_need: f64 = site.energy_need.iter().sum();
        let mut remaining = total_need;
        let mut stock = site.initial;
        let mut row = vec![0.0; horizon];
        let mut stock_warned = false;
        for t in 0..horizon {
            if site.charge_max[t] > 0.0 && remaining > 1e-12 {
                let headroom = (site.stock_max[t] - stock).max(0.0);
                let a = site.charge_max[t]
                    .min(remaining / site.efficiency)
                    .min(headroom / site.efficiency);
                row[t] = a;
                stock += site.efficiency * a;
                remaining -= site.efficiency * a;
            }
            stock -= site.energy_need[t];
            if !stock_warned && stock < -1e-9 {
                diagnostics.push(format!(
                    "site {si}: stored energy goes negative at period {t}; the group drives before it can charge"
                ));
                stock_warned = true;
            }
        }
        if remaining > 1e-9 * total_need.max(1.0) {
            return Err(BenchmarkError::InsufficientWindows {
                site: si,
                remaining,
            });
        }
        charge.push(row);
    }

    let discharge = vec![vec![0.0; horizon]; instance.sites.len()];
    Ok(ChargeSchedule {
        charge,
        discharge,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::formulation::{assemble_instance, ChargeSite, InstanceOptions, MopfInstance};
    use crate::timeseries::{scale_loads, SeasonProfile};

    fn instance_with_site(site: ChargeSite, horizon: usize) -> MopfInstance {
        let network = parse_case(include_str!("../../tests/fixtures/case3.m")).unwrap();
        let shape = SeasonProfile {
            label: "flat".into(),
            values: vec![1.0; horizon],
        };
        let loads = scale_loads(&network, &shape);
        let mut inst =
            assemble_instance(&network, &loads, &[], None, InstanceOptions::default()).unwrap();
        inst.sites = vec![site];
        inst
    }

    fn site(horizon: usize) -> ChargeSite {
        ChargeSite {
            bus: 1,
            charge_max: vec![6.6; horizon],
            discharge_max: vec![0.0; horizon],
            charge_min: None,
            discharge_min: None,
            energy_need: vec![0.0; horizon],
            stock_min: vec![0.0; horizon],
            stock_max: vec![32.0; horizon],
            efficiency: 0.9,
            initial: 0.0,
        }
    }

    #[test]
    fn greedy_front_loads_charging() {
        // 10 units of driving demand late in the day: charge 6.6 then the
        // remainder 10/0.9 - 6.6 = 4.511... in the second period.
        let mut s = site(8);
        s.energy_need[6] = 10.0;
        s.charge_max[6] = 0.0;
        s.stock_min[6] = 10.0;
        let inst = instance_with_site(s, 8);
        let sched = benchmark_charging(&inst).unwrap();
        assert!((sched.charge[0][0] - 6.6).abs() < 1e-12);
        assert!((sched.charge[0][1] - (10.0 / 0.9 - 6.6)).abs() < 1e-9);
        assert!((sched.charge[0][1] - 4.5111).abs() < 1e-3);
        assert!(sched.charge[0][2].abs() < 1e-12);
        // Terminal balance: eta * total charge equals total need.
        let total: f64 = sched.charge[0].iter().sum();
        assert!((0.9 * total - 10.0).abs() < 1e-9);
        assert!(sched.diagnostics.is_empty());
    }

    #[test]
    fn zero_demand_group_never_charges() {
        let inst = instance_with_site(site(6), 6);
        let sched = benchmark_charging(&inst).unwrap();
        assert!(sched.charge[0].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn driving_at_midnight_defers_charging_and_warns() {
        let mut s = site(6);
        s.energy_need[0] = 3.0;
        s.charge_max[0] = 0.0;
        s.stock_min[0] = 3.0;
        let inst = instance_with_site(s, 6);
        let sched = benchmark_charging(&inst).unwrap();
        assert_eq!(sched.charge[0][0], 0.0);
        assert!(sched.charge[0][1] > 0.0);
        assert!(!sched.diagnostics.is_empty());
    }

    #[test]
    fn capacity_limits_per_period_intake() {
        let mut s = site(10);
        s.stock_max = vec![4.0; 10];
        s.energy_need[5] = 3.0;
        s.charge_max[5] = 0.0;
        let inst = instance_with_site(s, 10);
        let sched = benchmark_charging(&inst).unwrap();
        // First period cannot exceed the 4.0 capacity over efficiency.
        assert!(sched.charge[0][0] <= 4.0 / 0.9 + 1e-12);
        let total: f64 = sched.charge[0].iter().sum();
        assert!((0.9 * total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn impossible_demand_is_reported() {
        let mut s = site(4);
        // Whole day driving: no window at all.
        for t in 0..4 {
            s.energy_need[t] = 2.0;
            s.charge_max[t] = 0.0;
        }
        let inst = instance_with_site(s, 4);
        assert!(matches!(
            benchmark_charging(&inst),
            Err(BenchmarkError::InsufficientWindows { site: 0, .. })
        ));
    }
}
