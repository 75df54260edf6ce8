//! Fleet modelling: trip records to hourly energy requirements, vehicle
//! grouping, bus assignment, and per-bus charging parameters.
//!
//! The chain is: filter trips to household passenger cars that fit in one
//! battery charge, spread each trip's energy over the hours it overlaps
//! (average speed times overlap fraction times consumption per mile),
//! aggregate vehicles into one group per load bus, and scale everything by
//! the demand-consistency weight.
//!
//! Durations are measured in fractional hours, so a trip of `d` miles always
//! contributes exactly `d * c_avg` kWh across the horizon regardless of how
//! period boundaries slice it.

mod groups;
mod profile;

pub use groups::{assign_groups, derive_charging_params, partition_groups, ChargerSpec, VehicleGroup};
pub use profile::{duration_matrix, energy_matrix, filter_trips, EnergyMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("trip {trip}: start {start} must precede end {end} within [0, {horizon}]")]
    BadInterval {
        trip: u64,
        start: f64,
        end: f64,
        horizon: f64,
    },
    #[error("trip {trip}: distance must be positive")]
    BadDistance { trip: u64 },
    #[error("trip {trip}: weight must be positive")]
    BadWeight { trip: u64 },
    #[error("vehicle {vehicle}: inconsistent weights across its trips")]
    InconsistentWeight { vehicle: u64 },
    #[error("{got} groups supplied for {expected} load buses")]
    GroupCountMismatch { got: usize, expected: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Vehicle body classes; only passenger classes survive filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleType {
    Car,
    Suv,
    Van,
    Pickup,
    Other,
}

impl VehicleType {
    pub fn is_passenger(self) -> bool {
        !matches!(self, VehicleType::Other)
    }

    pub fn parse(s: &str) -> VehicleType {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => VehicleType::Car,
            "suv" => VehicleType::Suv,
            "van" => VehicleType::Van,
            "pickup" | "pickup_truck" | "pickup truck" => VehicleType::Pickup,
            _ => VehicleType::Other,
        }
    }
}

/// One surveyed trip.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub vehicle: u64,
    pub trip: u64,
    /// Start time in fractional hours from midnight.
    pub start: f64,
    /// End time in fractional hours; `start < end <= horizon`.
    pub end: f64,
    pub miles: f64,
    /// Survey weighting factor of the vehicle.
    pub weight: f64,
    pub vehicle_type: VehicleType,
    pub household: bool,
}

impl TripRecord {
    pub fn check(&self, horizon: f64) -> Result<(), FleetError> {
        if !(0.0 <= self.start && self.start < self.end && self.end <= horizon) {
            return Err(FleetError::BadInterval {
                trip: self.trip,
                start: self.start,
                end: self.end,
                horizon,
            });
        }
        if self.miles <= 0.0 {
            return Err(FleetError::BadDistance { trip: self.trip });
        }
        if self.weight <= 0.0 {
            return Err(FleetError::BadWeight { trip: self.trip });
        }
        Ok(())
    }
}

/// Charging parameters of the aggregated vehicle group at one bus. Energies
/// in kWh, powers in kW; per-unit conversion happens at instance assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetGroup {
    pub bus: usize,
    /// Energy consumed while driving, per period.
    pub energy_need: Vec<f64>,
    /// Maximum charging power per period; zero while driving.
    pub charge_max: Vec<f64>,
    /// Maximum feed-in power per period; zero while driving.
    pub discharge_max: Vec<f64>,
    /// Minimum stored energy at the start of each period.
    pub stock_min: Vec<f64>,
    /// Battery capacity bound per period.
    pub stock_max: Vec<f64>,
    /// Charger efficiency applied to both directions.
    pub efficiency: f64,
    /// Stored energy at the horizon boundaries.
    pub initial_kwh: f64,
    /// Diagnostics, e.g. a driving block needing more than the battery holds.
    pub warnings: Vec<String>,
}

impl FleetGroup {
    pub fn horizon(&self) -> usize {
        self.energy_need.len()
    }

    /// A group that never charges or drives (bus without real load).
    pub fn inactive(bus: usize, horizon: usize, efficiency: f64) -> FleetGroup {
        FleetGroup {
            bus,
            energy_need: vec![0.0; horizon],
            charge_max: vec![0.0; horizon],
            discharge_max: vec![0.0; horizon],
            stock_min: vec![0.0; horizon],
            stock_max: vec![0.0; horizon],
            efficiency,
            initial_kwh: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn total_energy_need(&self) -> f64 {
        self.energy_need.iter().sum()
    }
}

/// Stable text dump of fleet groups for golden tests.
pub fn dump_groups(groups: &[FleetGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        out.push_str(&format!(
            "group bus={} eta={:.3} initial_kwh={:.3}\n",
            g.bus, g.efficiency, g.initial_kwh
        ));
        out.push_str("  t c_kwh a_max_kw b_max_kw s_min_kwh s_max_kwh\n");
        for t in 0..g.horizon() {
            out.push_str(&format!(
                "  {} {:.4} {:.4} {:.4} {:.4} {:.4}\n",
                t,
                g.energy_need[t],
                g.charge_max[t],
                g.discharge_max[t],
                g.stock_min[t],
                g.stock_max[t]
            ));
        }
    }
    out
}

/// Parses the trip CSV
/// `vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag`.
pub fn parse_trips_csv(text: &str, horizon: f64) -> Result<Vec<TripRecord>, FleetError> {
    let err = |line: usize, msg: &str| FleetError::Csv {
        line,
        msg: msg.to_string(),
    };
    let mut out = Vec::new();
    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if ln == 1 {
            if line.to_ascii_lowercase().starts_with("vehicle_id") {
                continue;
            }
            return Err(err(ln, "expected header starting with `vehicle_id`"));
        }
        let cols: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cols.len() != 8 {
            return Err(err(ln, &format!("expected 8 columns, got {}", cols.len())));
        }
        let parse_u64 = |s: &str, what: &str| -> Result<u64, FleetError> {
            s.parse().map_err(|_| err(ln, &format!("bad {what}")))
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64, FleetError> {
            s.parse().map_err(|_| err(ln, &format!("bad {what}")))
        };
        let record = TripRecord {
            vehicle: parse_u64(cols[0], "vehicle_id")?,
            trip: parse_u64(cols[1], "trip_id")?,
            start: parse_f64(cols[2], "start_hr")?,
            end: parse_f64(cols[3], "end_hr")?,
            miles: parse_f64(cols[4], "miles")?,
            weight: parse_f64(cols[5], "weight")?,
            vehicle_type: VehicleType::parse(cols[6]),
            household: matches!(cols[7], "1" | "true" | "yes"),
        };
        record.check(horizon)?;
        out.push(record);
    }
    Ok(out)
}
