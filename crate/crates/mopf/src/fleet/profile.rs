//! Trip filtering and the hourly energy-requirement computation.

use super::{FleetError, TripRecord};

/// Hourly energy requirements per vehicle, together with the intermediate
/// trip overlap matrix.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    /// Sorted unique vehicle ids.
    pub vehicle_ids: Vec<u64>,
    /// Survey weight per vehicle, aligned with `vehicle_ids`.
    pub weights: Vec<f64>,
    /// kWh required while driving: `energy[v][t]`.
    pub energy: Vec<Vec<f64>>,
    /// Trip-per-period overlap in fractional hours: `overlap[r][t]` in [0, 1].
    pub overlap: Vec<Vec<f64>>,
    /// Average speed per trip, miles per hour.
    pub speeds: Vec<f64>,
}

impl EnergyMatrix {
    pub fn horizon(&self) -> usize {
        self.energy.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Weighted total energy of vehicle `v` over the horizon.
    pub fn weighted_total(&self, v: usize) -> f64 {
        self.weights[v] * self.energy[v].iter().sum::<f64>()
    }
}

/// Keeps household passenger-car trips whose distance fits in one battery
/// charge: trips with `miles >= battery_kwh / consumption` are dropped.
pub fn filter_trips(
    trips: &[TripRecord],
    battery_kwh: f64,
    consumption_kwh_per_mile: f64,
) -> Vec<TripRecord> {
    let range_limit = battery_kwh / consumption_kwh_per_mile;
    trips
        .iter()
        .filter(|t| t.household && t.vehicle_type.is_passenger() && t.miles < range_limit)
        .cloned()
        .collect()
}

/// Overlap in hours between each trip interval and each unit period
/// `[t, t+1)`, clamped to [0, 1].
pub fn duration_matrix(trips: &[TripRecord], horizon: usize) -> Vec<Vec<f64>> {
    trips
        .iter()
        .map(|trip| {
            (0..horizon)
                .map(|t| {
                    let lo = trip.start.max(t as f64);
                    let hi = trip.end.min(t as f64 + 1.0);
                    (hi - lo).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect()
}

/// Energy per vehicle and period: average trip speed times overlap hours
/// times consumption per mile, summed over the vehicle's trips.
pub fn energy_matrix(
    trips: &[TripRecord],
    overlap: Vec<Vec<f64>>,
    consumption_kwh_per_mile: f64,
) -> Result<EnergyMatrix, FleetError> {
    assert_eq!(trips.len(), overlap.len());
    let horizon = overlap.first().map(|r| r.len()).unwrap_or(0);

    let mut speeds = Vec::with_capacity(trips.len());
    for trip in trips {
        let hours = trip.end - trip.start;
        if hours <= 0.0 {
            return Err(FleetError::BadInterval {
                trip: trip.trip,
                start: trip.start,
                end: trip.end,
                horizon: horizon as f64,
            });
        }
        speeds.push(trip.miles / hours);
    }

    let mut vehicle_ids: Vec<u64> = trips.iter().map(|t| t.vehicle).collect();
    vehicle_ids.sort_unstable();
    vehicle_ids.dedup();
    let index_of = |id: u64| vehicle_ids.binary_search(&id).unwrap();

    let mut weights = vec![f64::NAN; vehicle_ids.len()];
    let mut energy = vec![vec![0.0; horizon]; vehicle_ids.len()];
    for (r, trip) in trips.iter().enumerate() {
        let v = index_of(trip.vehicle);
        if weights[v].is_nan() {
            weights[v] = trip.weight;
        } else if (weights[v] - trip.weight).abs() > 1e-9 {
            return Err(FleetError::InconsistentWeight {
                vehicle: trip.vehicle,
            });
        }
        for t in 0..horizon {
            energy[v][t] += speeds[r] * overlap[r][t] * consumption_kwh_per_mile;
        }
    }

    Ok(EnergyMatrix {
        vehicle_ids,
        weights,
        energy,
        overlap,
        speeds,
    })
}
