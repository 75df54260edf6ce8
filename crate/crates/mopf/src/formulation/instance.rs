//! Assembly of the multi-period instance.

use crate::case::Network;
use crate::fleet::FleetGroup;
use crate::timeseries::{EmissionSeries, PeriodLoads};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("horizon mismatch: loads {loads}, fleet {fleet}, emissions {emissions}")]
    HorizonMismatch {
        loads: usize,
        fleet: usize,
        emissions: usize,
    },
    #[error("an emission cap or emission objective needs an emission series")]
    MissingEmissions,
    #[error("emission accounting needs a stored baseline generation")]
    MissingBaseline,
    #[error("fleet group bus index {0} out of range")]
    BadFleetBus(usize),
    #[error("two fleet groups share bus {0}")]
    DuplicateFleetBus(usize),
    #[error("generator {0} has a nonconvex cost polynomial")]
    NonconvexCost(usize),
    #[error(transparent)]
    Conic(#[from] crate::conic::ProgramError),
}

/// Which objective the conic build materializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Total generation cost over the horizon.
    Cost,
    /// Emission attributable to deviations from the stored baseline.
    Emission,
}

/// Per-bus aggregated charging site, all quantities per-unit on the system
/// base (energies are per-unit-hours).
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSite {
    pub bus: usize,
    pub charge_max: Vec<f64>,
    pub discharge_max: Vec<f64>,
    /// Optional pinned lower bounds (default zero) used when re-solving the
    /// relaxation around a fixed schedule.
    pub charge_min: Option<Vec<f64>>,
    pub discharge_min: Option<Vec<f64>>,
    pub energy_need: Vec<f64>,
    pub stock_min: Vec<f64>,
    pub stock_max: Vec<f64>,
    pub efficiency: f64,
    pub initial: f64,
}

impl ChargeSite {
    pub fn total_energy_need(&self) -> f64 {
        self.energy_need.iter().sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceOptions {
    pub ev_enabled: bool,
    pub v2g_enabled: bool,
    pub objective: ObjectiveKind,
    pub emission_cap_kg: Option<f64>,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        InstanceOptions {
            ev_enabled: true,
            v2g_enabled: true,
            objective: ObjectiveKind::Cost,
            emission_cap_kg: None,
        }
    }
}

/// The assembled multi-period instance.
#[derive(Debug, Clone)]
pub struct MopfInstance {
    pub network: Network,
    pub loads: PeriodLoads,
    pub sites: Vec<ChargeSite>,
    pub emissions: Option<EmissionSeries>,
    /// Reference generation per generator and period, per-unit, from the
    /// relaxation route; enters the cone programs' emission rows. Filled by
    /// the orchestrator before any emission accounting.
    pub baseline: Option<Vec<Vec<f64>>>,
    /// Reference generation from the local-solve route, carrying the true
    /// network losses; realized emissions of recovered schedules are
    /// measured against this one so both sides of the difference see the
    /// same loss model.
    pub baseline_local: Option<Vec<Vec<f64>>>,
    pub objective: ObjectiveKind,
    pub emission_cap_kg: Option<f64>,
    pub horizon: usize,
}

impl MopfInstance {
    pub fn with_objective(&self, objective: ObjectiveKind) -> MopfInstance {
        MopfInstance {
            objective,
            ..self.clone()
        }
    }

    pub fn with_cap(&self, cap: Option<f64>) -> MopfInstance {
        MopfInstance {
            emission_cap_kg: cap,
            ..self.clone()
        }
    }

    /// A view with the charging schedule pinned: both charge and feed-in
    /// bounds collapse onto the given values, so the relaxation solves the
    /// network around a fixed schedule (used to warm-start its recovery).
    pub fn with_pinned_schedule(
        &self,
        charge: &[Vec<f64>],
        discharge: &[Vec<f64>],
    ) -> MopfInstance {
        let mut out = self.clone();
        out.emission_cap_kg = None;
        for (s, site) in out.sites.iter_mut().enumerate() {
            site.charge_max = charge[s].clone();
            site.charge_min = Some(charge[s].clone());
            site.discharge_max = discharge[s].clone();
            site.discharge_min = Some(discharge[s].clone());
        }
        out
    }

    /// The charging-free view used for the baseline solve: no fleet
    /// columns, no cap row, cost objective.
    pub fn without_fleet(&self) -> MopfInstance {
        MopfInstance {
            sites: Vec::new(),
            emission_cap_kg: None,
            objective: ObjectiveKind::Cost,
            ..self.clone()
        }
    }

    pub fn set_baseline(&mut self, baseline: Vec<Vec<f64>>) {
        assert_eq!(baseline.len(), self.network.generators.len());
        self.baseline = Some(baseline);
    }

    pub fn set_baseline_local(&mut self, baseline: Vec<Vec<f64>>) {
        assert_eq!(baseline.len(), self.network.generators.len());
        self.baseline_local = Some(baseline);
    }

    fn reference(&self, local: bool) -> Result<&Vec<Vec<f64>>, FormulationError> {
        if local {
            self.baseline_local
                .as_ref()
                .or(self.baseline.as_ref())
                .ok_or(FormulationError::MissingBaseline)
        } else {
            self.baseline
                .as_ref()
                .ok_or(FormulationError::MissingBaseline)
        }
    }

    /// Emission in kg of a relaxation generation matrix `p[gen][t]`
    /// (per-unit) against the relaxed baseline.
    pub fn emission_of(&self, p: &[Vec<f64>]) -> Result<f64, FormulationError> {
        let e = self
            .emissions
            .as_ref()
            .ok_or(FormulationError::MissingEmissions)?;
        let base = self.reference(false)?;
        let mut total = 0.0;
        for (g, row) in p.iter().enumerate() {
            for (t, &pg) in row.iter().enumerate() {
                total += e.values[t] * self.network.base_mva * (pg - base[g][t]);
            }
        }
        Ok(total)
    }

    /// Per-period emission `e_t * base * sum_g (p_gt - ref_gt)` of a
    /// recovered (local-solve) operating point, measured against the
    /// local-route baseline.
    pub fn emission_of_period(&self, t: usize, p_t: &[f64]) -> Result<f64, FormulationError> {
        let e = self
            .emissions
            .as_ref()
            .ok_or(FormulationError::MissingEmissions)?;
        let base = self.reference(true)?;
        let mut sum = 0.0;
        for (g, &pg) in p_t.iter().enumerate() {
            sum += pg - base[g][t];
        }
        Ok(e.values[t] * self.network.base_mva * sum)
    }
}

/// Binds network, scaled loads, fleet groups (kWh), and emission factors
/// into a per-unit instance.
///
/// Conversions: kWh divide by `1000 * base_mva` into per-unit-hours, kW
/// divide by the same into per-unit power. Generators with an all-zero cost
/// polynomial get their lower active bound cleared.
pub fn assemble_instance(
    network: &Network,
    loads: &PeriodLoads,
    fleet: &[FleetGroup],
    emissions: Option<EmissionSeries>,
    options: InstanceOptions,
) -> Result<MopfInstance, FormulationError> {
    let horizon = loads.horizon();
    let fleet_horizon = fleet.first().map(|g| g.horizon()).unwrap_or(horizon);
    let emissions_horizon = emissions.as_ref().map(|e| e.horizon()).unwrap_or(horizon);
    if fleet_horizon != horizon || emissions_horizon != horizon {
        return Err(FormulationError::HorizonMismatch {
            loads: horizon,
            fleet: fleet_horizon,
            emissions: emissions_horizon,
        });
    }
    if options.emission_cap_kg.is_some() && emissions.is_none() {
        return Err(FormulationError::MissingEmissions);
    }
    for (gi, g) in network.generators.iter().enumerate() {
        if !g.cost.is_convex() {
            return Err(FormulationError::NonconvexCost(gi));
        }
    }

    let mut network = network.clone();
    for g in network.generators.iter_mut() {
        if g.cost.is_zero() && g.p_min > 0.0 {
            g.p_min = 0.0;
        }
    }

    let to_pu = 1.0 / (1000.0 * network.base_mva);
    let mut sites = Vec::new();
    if options.ev_enabled {
        for group in fleet {
            if group.bus >= network.buses.len() {
                return Err(FormulationError::BadFleetBus(group.bus));
            }
            let scale = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * to_pu).collect() };
            sites.push(ChargeSite {
                bus: group.bus,
                charge_min: None,
                discharge_min: None,
                charge_max: scale(&group.charge_max),
                discharge_max: if options.v2g_enabled {
                    scale(&group.discharge_max)
                } else {
                    vec![0.0; horizon]
                },
                energy_need: scale(&group.energy_need),
                stock_min: scale(&group.stock_min),
                stock_max: scale(&group.stock_max),
                efficiency: group.efficiency,
                initial: group.initial_kwh * to_pu,
            });
        }
        sites.sort_by_key(|s| s.bus);
        for pair in sites.windows(2) {
            if pair[0].bus == pair[1].bus {
                return Err(FormulationError::DuplicateFleetBus(pair[0].bus));
            }
        }
    }

    Ok(MopfInstance {
        network,
        loads: loads.clone(),
        sites,
        emissions,
        baseline: None,
        baseline_local: None,
        objective: options.objective,
        emission_cap_kg: options.emission_cap_kg,
        horizon,
    })
}
