//! Vehicle grouping, bus assignment, and charging-parameter derivation.

use super::{EnergyMatrix, FleetError, FleetGroup};
use crate::case::Network;

/// Battery and charger ratings of the reference vehicle, per weighted unit.
#[derive(Debug, Clone, Copy)]
pub struct ChargerSpec {
    pub charger_kw: f64,
    pub usable_kwh: f64,
    pub efficiency: f64,
}

impl Default for ChargerSpec {
    fn default() -> Self {
        // Compact-EV reference: 6.6 kW onboard charger, 32 kWh usable
        // battery, 90% charger efficiency.
        ChargerSpec {
            charger_kw: 6.6,
            usable_kwh: 32.0,
            efficiency: 0.9,
        }
    }
}

/// An aggregated set of vehicles sharing one connection bus.
#[derive(Debug, Clone, Default)]
pub struct VehicleGroup {
    /// Indices into the [`EnergyMatrix`] vehicle list.
    pub members: Vec<usize>,
    /// Sum of member survey weights.
    pub weight_sum: f64,
    /// Weighted hourly energy requirement, kWh per period.
    pub energy: Vec<f64>,
    /// Total weighted energy over the horizon (the assignment key).
    pub weighted_energy: f64,
    /// Smallest member vehicle id; deterministic tie-break key.
    min_vehicle_id: u64,
}

impl VehicleGroup {
    /// An empty group; populate `energy` and `weight_sum` before deriving
    /// charging parameters from it.
    pub fn empty(horizon: usize) -> VehicleGroup {
        VehicleGroup {
            members: Vec::new(),
            weight_sum: 0.0,
            energy: vec![0.0; horizon],
            weighted_energy: 0.0,
            min_vehicle_id: u64::MAX,
        }
    }
}

/// Partitions vehicles into `count` groups by round-robin over the list
/// sorted by descending weighted energy (ties by ascending vehicle id), so
/// group demands are balanced yet distinct. Deterministic under permutation
/// of the input.
pub fn partition_groups(matrix: &EnergyMatrix, count: usize) -> Vec<VehicleGroup> {
    let horizon = matrix.horizon();
    let mut order: Vec<usize> = (0..matrix.vehicle_ids.len()).collect();
    order.sort_by(|&a, &b| {
        matrix
            .weighted_total(b)
            .partial_cmp(&matrix.weighted_total(a))
            .unwrap()
            .then(matrix.vehicle_ids[a].cmp(&matrix.vehicle_ids[b]))
    });

    let mut groups: Vec<VehicleGroup> = (0..count)
        .map(|_| VehicleGroup {
            members: Vec::new(),
            weight_sum: 0.0,
            energy: vec![0.0; horizon],
            weighted_energy: 0.0,
            min_vehicle_id: u64::MAX,
        })
        .collect();
    for (rank, &v) in order.iter().enumerate() {
        let g = &mut groups[rank % count];
        g.members.push(v);
        g.weight_sum += matrix.weights[v];
        for t in 0..horizon {
            g.energy[t] += matrix.weights[v] * matrix.energy[v][t];
        }
        g.min_vehicle_id = g.min_vehicle_id.min(matrix.vehicle_ids[v]);
    }
    for g in &mut groups {
        g.weighted_energy = g.energy.iter().sum();
    }
    groups
}

/// Pairs groups with load buses rank-to-rank: buses sorted by descending
/// real load (ties by ascending bus id), groups by descending weighted
/// energy (ties by ascending smallest member id). Returns `(bus, group)`
/// index pairs; buses without real load receive no group.
pub fn assign_groups(
    network: &Network,
    groups: &[VehicleGroup],
) -> Result<Vec<(usize, usize)>, FleetError> {
    let load_buses = network.load_buses();
    if groups.len() != load_buses.len() {
        return Err(FleetError::GroupCountMismatch {
            got: groups.len(),
            expected: load_buses.len(),
        });
    }
    let mut bus_order = load_buses;
    bus_order.sort_by(|&a, &b| {
        network.buses[b]
            .load_p
            .partial_cmp(&network.buses[a].load_p)
            .unwrap()
            .then(network.buses[a].id.cmp(&network.buses[b].id))
    });
    let mut group_order: Vec<usize> = (0..groups.len()).collect();
    group_order.sort_by(|&a, &b| {
        groups[b]
            .weighted_energy
            .partial_cmp(&groups[a].weighted_energy)
            .unwrap()
            .then(groups[a].min_vehicle_id.cmp(&groups[b].min_vehicle_id))
    });
    Ok(bus_order.into_iter().zip(group_order).collect())
}

/// Derives the charging parameters of one group at its bus.
///
/// All energies scale by `weight` (the demand-consistency factor) times the
/// group's summed survey weight. The minimum-stock curve covers each maximal
/// run of driving periods by its remaining demand, clamped to capacity.
pub fn derive_charging_params(
    bus: usize,
    group: &VehicleGroup,
    weight: f64,
    spec: ChargerSpec,
) -> FleetGroup {
    let horizon = group.energy.len();
    let mut warnings = Vec::new();

    let energy_need: Vec<f64> = group.energy.iter().map(|e| weight * e).collect();
    let rating = weight * group.weight_sum;
    let cap = rating * spec.usable_kwh;
    let charge: Vec<f64> = energy_need
        .iter()
        .map(|&c| if c > 0.0 { 0.0 } else { rating * spec.charger_kw })
        .collect();

    // Remaining demand of the driving block containing t, clamped to
    // capacity; zero outside driving blocks.
    let mut stock_min = vec![0.0; horizon];
    let mut suffix = 0.0;
    for t in (0..horizon).rev() {
        if energy_need[t] > 0.0 {
            suffix += energy_need[t];
            if suffix > cap {
                if stock_min[(t + 1).min(horizon - 1)] <= cap {
                    warnings.push(format!(
                        "driving block ending near period {t} needs {suffix:.3} kWh, above capacity {cap:.3}; minimum stock clamped"
                    ));
                }
                stock_min[t] = cap;
            } else {
                stock_min[t] = suffix;
            }
        } else {
            suffix = 0.0;
        }
    }

    FleetGroup {
        bus,
        energy_need,
        discharge_max: charge.clone(),
        charge_max: charge,
        stock_min,
        stock_max: vec![cap; horizon],
        efficiency: spec.efficiency,
        initial_kwh: 0.0,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::fleet::profile::{duration_matrix, energy_matrix};
    use crate::fleet::{TripRecord, VehicleType};
    use proptest::prelude::*;

    fn matrix_from(demands: &[(u64, f64)]) -> EnergyMatrix {
        // One trip per vehicle at hour 8-9 carrying the requested energy.
        let trips: Vec<TripRecord> = demands
            .iter()
            .enumerate()
            .map(|(i, &(v, kwh))| TripRecord {
                vehicle: v,
                trip: i as u64,
                start: 8.0,
                end: 9.0,
                miles: kwh / 0.3,
                weight: 1.0,
                vehicle_type: VehicleType::Car,
                household: true,
            })
            .collect();
        let overlap = duration_matrix(&trips, 24);
        energy_matrix(&trips, overlap, 0.3).unwrap()
    }

    #[test]
    fn rank_pairing_matches_loads() {
        // case3: bus index 1 has load 0.30, bus index 2 has 0.20.
        let n = parse_case(include_str!("../../tests/fixtures/case3.m")).unwrap();
        let m = matrix_from(&[(1, 10.0), (2, 4.0)]);
        let groups = partition_groups(&m, 2);
        let pairs = assign_groups(&n, &groups).unwrap();
        // Heaviest group (10 kWh vehicle) goes to the heavier bus (index 1).
        let heavy_group = groups
            .iter()
            .position(|g| (g.weighted_energy - 10.0).abs() < 1e-9)
            .unwrap();
        assert!(pairs.contains(&(1, heavy_group)));
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn group_count_mismatch_is_error() {
        let n = parse_case(include_str!("../../tests/fixtures/case3.m")).unwrap();
        let m = matrix_from(&[(1, 10.0)]);
        let groups = partition_groups(&m, 1);
        assert!(matches!(
            assign_groups(&n, &groups),
            Err(FleetError::GroupCountMismatch {
                got: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn assignment_invariant_under_permutation() {
        let n = parse_case(include_str!("../../tests/fixtures/case5.m")).unwrap();
        let a = matrix_from(&[(1, 9.0), (2, 5.0), (3, 7.0), (4, 2.0), (5, 1.0), (6, 4.0)]);
        let b = matrix_from(&[(4, 2.0), (6, 4.0), (1, 9.0), (5, 1.0), (3, 7.0), (2, 5.0)]);
        let ga = partition_groups(&a, 3);
        let gb = partition_groups(&b, 3);
        let pa = assign_groups(&n, &ga).unwrap();
        let pb = assign_groups(&n, &gb).unwrap();
        // Compare by (bus, group energy profile).
        let profile =
            |groups: &[VehicleGroup], pairs: &[(usize, usize)]| -> Vec<(usize, Vec<u64>)> {
                let mut v: Vec<(usize, Vec<u64>)> = pairs
                    .iter()
                    .map(|&(bus, g)| {
                        (
                            bus,
                            groups[g].energy.iter().map(|e| (e * 1e9) as u64).collect(),
                        )
                    })
                    .collect();
                v.sort();
                v
            };
        assert_eq!(profile(&ga, &pa), profile(&gb, &pb));
    }

    #[test]
    fn stock_min_is_remaining_block_demand() {
        let mut g = VehicleGroup {
            members: vec![0],
            weight_sum: 1.0,
            energy: vec![0.0; 24],
            weighted_energy: 7.0,
            min_vehicle_id: 1,
        };
        g.energy[2] = 4.0;
        g.energy[3] = 3.0;
        let fg = derive_charging_params(0, &g, 1.0, ChargerSpec::default());
        assert_eq!(fg.stock_min[0], 0.0);
        assert_eq!(fg.stock_min[1], 0.0);
        assert!((fg.stock_min[2] - 7.0).abs() < 1e-12);
        assert!((fg.stock_min[3] - 3.0).abs() < 1e-12);
        assert_eq!(fg.stock_min[4], 0.0);
        // Driving periods forbid charging.
        assert_eq!(fg.charge_max[2], 0.0);
        assert_eq!(fg.charge_max[3], 0.0);
        assert!((fg.charge_max[4] - 6.6).abs() < 1e-12);
    }

    #[test]
    fn idle_group_can_always_charge() {
        let g = VehicleGroup {
            members: vec![0],
            weight_sum: 1.0,
            energy: vec![0.0; 24],
            weighted_energy: 0.0,
            min_vehicle_id: 1,
        };
        let fg = derive_charging_params(0, &g, 0.19, ChargerSpec::default());
        assert!(fg.stock_min.iter().all(|&s| s == 0.0));
        assert!(fg
            .charge_max
            .iter()
            .all(|&a| (a - 0.19 * 6.6).abs() < 1e-12));
        // Capacity at the published compact-EV scale: 0.19 * 32 = 6.08 kWh.
        assert!((fg.stock_max[0] - 6.08).abs() < 1e-12);
    }

    #[test]
    fn over_capacity_block_warns_and_clamps() {
        let mut g = VehicleGroup {
            members: vec![0],
            weight_sum: 1.0,
            energy: vec![0.0; 6],
            weighted_energy: 0.0,
            min_vehicle_id: 1,
        };
        g.energy[1] = 30.0;
        g.energy[2] = 30.0;
        let fg = derive_charging_params(0, &g, 1.0, ChargerSpec::default());
        assert!(!fg.warnings.is_empty());
        assert!((fg.stock_min[1] - 32.0).abs() < 1e-12);
        assert!((fg.stock_min[2] - 30.0).abs() < 1e-12);
    }

    proptest! {
        /// Driving and charging are mutually exclusive in every derived group.
        #[test]
        fn charge_and_drive_exclusive(
            demands in proptest::collection::vec(0.0f64..8.0, 24),
            weight in 0.1f64..2.0
        ) {
            let g = VehicleGroup {
                members: vec![0],
                weight_sum: 1.3,
                energy: demands,
                weighted_energy: 0.0,
                min_vehicle_id: 1,
            };
            let fg = derive_charging_params(0, &g, weight, ChargerSpec::default());
            for t in 0..fg.horizon() {
                prop_assert!(fg.charge_max[t] * fg.energy_need[t] == 0.0);
                prop_assert!(fg.discharge_max[t] * fg.energy_need[t] == 0.0);
                prop_assert!(fg.stock_min[t] <= fg.stock_max[t] + 1e-12);
            }
        }
    }
}
