//! End-to-end sweeps on small fixtures.

mod common;

use common::{build_scenario, scenario_instance, HORIZON};
use mopf::conic::ConicSettings;
use mopf::formulation::InstanceOptions;
use mopf::pareto::{
    baseline_generation, benchmark_point, emission_bounds, frontier_csv, hourly_csv,
    lower_bound_with_cap, no_ev_cost, sweep, FrontierRow, PipelineError, SweepSettings,
};

fn settings(points: usize) -> SweepSettings {
    SweepSettings {
        points,
        threads: 4,
        ..Default::default()
    }
}

fn conic() -> ConicSettings {
    SweepSettings::default().conic
}

#[test]
fn three_bus_sweep_produces_certified_frontier() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 6, 0.05);
    let instance = scenario_instance(&scenario, InstanceOptions::default());
    let outcome = sweep(&instance, &settings(4)).expect("sweep");

    assert_eq!(outcome.points.len(), 4);
    assert!(outcome.bounds.lower <= outcome.bounds.upper);
    // Caps strictly increasing, endpoint-inclusive.
    assert!((outcome.caps[0] - outcome.bounds.lower).abs() < 1e-9);
    assert!((outcome.caps[3] - outcome.bounds.upper).abs() < 1e-9);
    for w in outcome.caps.windows(2) {
        assert!(w[1] > w[0]);
    }

    // Recovered schedules see true network losses while the caps live in
    // the relaxation's loss model, so realized emissions can drift off the
    // cap grid; the drift is bounded by a modest share of the sweep range.
    let range = (outcome.bounds.upper - outcome.bounds.lower).abs();
    for (k, point) in outcome.points.iter().enumerate() {
        assert!(point.valid, "point {k}: {:?}", point.invalid_reason);
        assert!(
            point.lb_cost <= point.ub_cost * (1.0 + 1e-9),
            "point {k}: lb {} ub {}",
            point.lb_cost,
            point.ub_cost
        );
        assert!(point.gap_pct >= -1e-9);
        assert!(point.emission_kg >= outcome.bounds.lower - 0.2 * range - 1e-9);
        assert!(point.emission_kg <= outcome.bounds.upper + 0.2 * range + 1e-9);
        assert!(
            point.emission_kg <= point.cap_kg + 0.2 * range + 1e-6 * point.cap_kg.abs(),
            "point {k}: emission {} far above cap {}",
            point.emission_kg,
            point.cap_kg
        );
        // Storage conservation per site.
        for (s, site) in instance.sites.iter().enumerate() {
            let charged: f64 = point.schedule.charge[s].iter().sum();
            let discharged: f64 = point.schedule.discharge[s].iter().sum();
            let need: f64 = site.energy_need.iter().sum();
            let residual = site.efficiency * charged - discharged - need;
            assert!(
                residual.abs() < 1e-6,
                "point {k} site {s}: stock residual {residual}"
            );
        }
        assert_eq!(point.period_costs.len(), HORIZON);
    }

    // Tighter caps cannot cost less.
    for w in outcome.points.windows(2) {
        assert!(w[0].ub_cost >= w[1].ub_cost - 1e-5 * w[1].ub_cost.abs());
    }
}

#[test]
fn sweep_is_deterministic_byte_for_byte() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 4, 0.04);
    let instance = scenario_instance(&scenario, InstanceOptions::default());
    let s = settings(3);
    let a = sweep(&instance, &s).unwrap();
    let b = sweep(&instance, &s).unwrap();
    let rows =
        |o: &mopf::pareto::SweepOutcome| -> Vec<FrontierRow> {
            o.points
                .iter()
                .map(|p| FrontierRow {
                    point: p.clone(),
                    tag: "sweep",
                })
                .collect()
        };
    let csv_a = frontier_csv(&rows(&a), None).unwrap();
    let csv_b = frontier_csv(&rows(&b), None).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.starts_with("cap_kg,ub_cost,lb_cost,emission_kg,gap_pct"));
    let dump_a = hourly_csv(&a.points[0]);
    let dump_b = hourly_csv(&b.points[0]);
    assert_eq!(dump_a, dump_b);
    assert_eq!(dump_a.lines().count(), HORIZON + 1);
}

#[test]
fn zero_fleet_demand_degenerates_emission_bounds() {
    // Single-bus system: generation is pinned to load plus shunt loss, so
    // with no fleet both emission bounds sit at zero.
    let network = mopf::case::parse_case(include_str!("fixtures/case1.m")).unwrap();
    let shape = mopf::timeseries::SeasonProfile {
        label: "flat".into(),
        values: vec![1.0; HORIZON],
    };
    let loads = mopf::timeseries::scale_loads(&network, &shape);
    let emissions =
        mopf::timeseries::EmissionSeries::new(common::valley_emissions()).unwrap();
    let mut instance = mopf::formulation::assemble_instance(
        &network,
        &loads,
        &[],
        Some(emissions),
        InstanceOptions::default(),
    )
    .unwrap();
    let baselines = mopf::pareto::compute_baselines(&instance, &settings(2)).unwrap();
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);
    let bounds = emission_bounds(&instance, &conic()).unwrap();
    let scale = instance.network.total_load_p() * instance.network.base_mva * 700.0;
    assert!(bounds.lower.abs() < 1e-4 * scale, "lbe = {}", bounds.lower);
    assert!(bounds.upper.abs() < 1e-4 * scale, "ube = {}", bounds.upper);

    // Meshed case with idle vehicles: the cost optimum defines the upper
    // bound, so it stays at zero, while loss-shifting redispatch still
    // opens a nonpositive lower bound.
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 4, 0.05);
    let mut fleet = scenario.fleet.clone();
    for g in fleet.iter_mut() {
        let horizon = g.horizon();
        g.energy_need = vec![0.0; horizon];
        g.stock_min = vec![0.0; horizon];
    }
    let mut idle = mopf::formulation::assemble_instance(
        &scenario.network,
        &scenario.loads,
        &fleet,
        Some(scenario.emissions.clone()),
        InstanceOptions {
            v2g_enabled: false,
            ..Default::default()
        },
    )
    .unwrap();
    let baselines = mopf::pareto::compute_baselines(&idle, &settings(2)).unwrap();
    idle.set_baseline(baselines.relaxed);
    idle.set_baseline_local(baselines.local);
    let idle_bounds = emission_bounds(&idle, &conic()).unwrap();
    let idle_scale = idle.network.total_load_p() * idle.network.base_mva * 700.0 * 24.0;
    assert!(
        idle_bounds.upper.abs() < 1e-4 * idle_scale,
        "ube = {}",
        idle_bounds.upper
    );
    assert!(idle_bounds.lower <= idle_bounds.upper + 1e-9);
}

#[test]
fn capped_lower_bound_is_monotone_in_the_cap() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 6, 0.05);
    let mut instance = scenario_instance(&scenario, InstanceOptions::default());
    let baselines = mopf::pareto::compute_baselines(&instance, &settings(2)).unwrap();
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);
    let bounds = emission_bounds(&instance, &conic()).unwrap();
    let mut previous = f64::INFINITY;
    for k in 0..6 {
        let cap = bounds.lower + (bounds.upper - bounds.lower) * k as f64 / 5.0;
        let sol = lower_bound_with_cap(&instance, cap, &conic()).unwrap();
        let value = mopf::pareto::lower_bound_value(&sol);
        assert!(
            value <= previous * (1.0 + 1e-6),
            "cap {cap}: {value} after {previous}"
        );
        previous = value;
    }
}

#[test]
fn infeasible_cap_is_a_distinct_error() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 6, 0.05);
    let mut instance = scenario_instance(&scenario, InstanceOptions::default());
    let baselines = mopf::pareto::compute_baselines(&instance, &settings(2)).unwrap();
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);
    let bounds = emission_bounds(&instance, &conic()).unwrap();
    let below = bounds.lower - 0.5 * (bounds.upper - bounds.lower).max(1.0);
    match lower_bound_with_cap(&instance, below, &conic()) {
        Err(PipelineError::CapInfeasible { .. }) => {}
        other => panic!("expected CapInfeasible, got {other:?}"),
    }
}

#[test]
fn benchmark_is_a_valid_point_and_v2g_free() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 6, 0.05);
    let instance = scenario_instance(&scenario, InstanceOptions::default());
    let point = benchmark_point(&instance, &settings(2)).expect("benchmark");
    assert!(point.valid);
    assert!(point.lb_cost <= point.ub_cost * (1.0 + 1e-9));
    assert!(point.hourly.v2g_power.iter().all(|&v| v == 0.0));
    // Uncoordinated charging front-loads into the first connected hours.
    let early: f64 = point.hourly.gen_for_ev[..7].iter().sum();
    let late: f64 = point.hourly.gen_for_ev[9..].iter().sum();
    assert!(early > late, "early {early} late {late}");
}

#[test]
fn no_ev_cost_matches_baseline_scale() {
    let scenario = build_scenario(include_str!("fixtures/case3.m"), 6, 0.05);
    let instance = scenario_instance(&scenario, InstanceOptions::default());
    let cost = no_ev_cost(&instance, &settings(2)).unwrap();
    let baseline = baseline_generation(&instance).unwrap();
    // The feasible cost sits at or above the relaxation bound, within a
    // small gap on this radial network.
    assert!(cost >= baseline.objective * (1.0 - 1e-6));
    assert!(cost <= baseline.objective * 1.01);
}

#[test]
fn degenerate_range_collapses_to_one_point() {
    // Idle fleet on the single-bus system: the emission range is a point.
    let network = mopf::case::parse_case(include_str!("fixtures/case1.m")).unwrap();
    let shape = mopf::timeseries::SeasonProfile {
        label: "flat".into(),
        values: vec![1.0; HORIZON],
    };
    let loads = mopf::timeseries::scale_loads(&network, &shape);
    let emissions = mopf::timeseries::EmissionSeries::new(common::valley_emissions()).unwrap();
    let instance = mopf::formulation::assemble_instance(
        &network,
        &loads,
        &[],
        Some(emissions),
        InstanceOptions::default(),
    )
    .unwrap();
    let outcome = mopf::pareto::sweep(&instance, &settings(5)).unwrap();
    assert_eq!(outcome.points.len(), 1);
    assert!(outcome.points[0].valid);
}
