//! Builds the optimization instance from the configured input files.

use crate::config::{RunConfig, Season};
use mopf::case::parse_case;
use mopf::fleet::{
    assign_groups, derive_charging_params, duration_matrix, energy_matrix, filter_trips,
    parse_trips_csv, partition_groups, ChargerSpec, FleetGroup,
};
use mopf::formulation::{assemble_instance, InstanceOptions, MopfInstance};
use mopf::timeseries::{demand_weight, normalize_profiles, parse_series_csv, scale_loads, EmissionSeries};

pub struct Scenario {
    pub instance: MopfInstance,
    pub fleet: Vec<FleetGroup>,
    pub weight: f64,
    /// Survey-weighted fleet mileage scaled by the demand weight.
    pub total_miles: f64,
    pub grid_total: f64,
}

pub enum ScenarioError {
    Input(String),
    Internal(String),
}

impl ScenarioError {
    fn input(e: impl std::fmt::Display) -> ScenarioError {
        ScenarioError::Input(e.to_string())
    }
}

fn read(path: &std::path::Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Input(format!("{}: {e}", path.display())))
}

/// Assembles the full input chain: case file, jointly normalized demand
/// shapes, season-matched emission factors, trips filtered into per-bus
/// groups, and the demand-consistency weight
/// `grid total / max(summer total, winter total)` applied to every fleet
/// parameter.
pub fn build(config: &RunConfig) -> Result<Scenario, ScenarioError> {
    let horizon = config.horizon;
    let network = parse_case(&read(&config.case)?).map_err(ScenarioError::input)?;
    let diagnostics = mopf::case::validate(&network);
    if !diagnostics.is_empty() {
        let all: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(ScenarioError::Input(all.join("; ")));
    }

    let raw_summer =
        parse_series_csv(&read(&config.demand_summer)?, horizon).map_err(ScenarioError::input)?;
    let raw_winter =
        parse_series_csv(&read(&config.demand_winter)?, horizon).map_err(ScenarioError::input)?;
    let profiles = normalize_profiles(&[("summer", &raw_summer), ("winter", &raw_winter)])
        .map_err(ScenarioError::input)?;
    let shape = match config.season {
        Season::Summer => &profiles[0],
        Season::Winter => &profiles[1],
    };
    let loads = scale_loads(&network, shape);

    let emissions_path = match config.season {
        Season::Summer => &config.emissions_summer,
        Season::Winter => &config.emissions_winter,
    };
    let emissions = EmissionSeries::new(
        parse_series_csv(&read(emissions_path)?, horizon).map_err(ScenarioError::input)?,
    )
    .map_err(ScenarioError::input)?;

    // Same grid/consumption ratio convention as the reference daily-demand
    // table: megawatt loads against kilowatt-hour consumption totals.
    let grid_total = network.total_load_p() * network.base_mva * shape.total();
    let weight = demand_weight(
        grid_total,
        raw_summer.iter().sum(),
        raw_winter.iter().sum(),
    )
    .map_err(ScenarioError::input)?;

    let trips =
        parse_trips_csv(&read(&config.trips)?, horizon as f64).map_err(ScenarioError::input)?;
    let spec = ChargerSpec {
        charger_kw: config.charger_kw,
        usable_kwh: config.battery_kwh,
        efficiency: config.efficiency,
    };
    let filtered = filter_trips(&trips, config.battery_kwh, config.consumption_kwh_per_mile);
    if filtered.is_empty() && config.ev_enabled {
        return Err(ScenarioError::Input(
            "no trips survive filtering; nothing to charge".to_string(),
        ));
    }
    let total_miles: f64 = filtered.iter().map(|t| t.miles * t.weight * weight).sum();
    let overlap = duration_matrix(&filtered, horizon);
    let matrix =
        energy_matrix(&filtered, overlap, config.consumption_kwh_per_mile).map_err(ScenarioError::input)?;
    let groups = partition_groups(&matrix, network.load_buses().len());
    let pairs = assign_groups(&network, &groups).map_err(ScenarioError::input)?;
    let fleet: Vec<FleetGroup> = pairs
        .iter()
        .map(|&(bus, g)| derive_charging_params(bus, &groups[g], weight, spec))
        .collect();

    let instance = assemble_instance(
        &network,
        &loads,
        &fleet,
        Some(emissions),
        InstanceOptions {
            ev_enabled: config.ev_enabled,
            v2g_enabled: config.v2g_enabled,
            ..Default::default()
        },
    )
    .map_err(|e| ScenarioError::Internal(e.to_string()))?;

    Ok(Scenario {
        instance,
        fleet,
        weight,
        total_miles,
        grid_total,
    })
}
