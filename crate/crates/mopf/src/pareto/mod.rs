//! The cap-sweep orchestrator: baseline generation, emission bounds, the
//! frontier sweep, the uncoordinated benchmark, and percentage reporting.
//!
//! One sweep point at cap `rho` runs: relaxation solve at the cap, fix the
//! charging schedule, recover a feasible cost by solving the periods
//! independently (they decouple once the schedule is fixed), measure the
//! realized emission, then re-solve the relaxation with the cap tightened
//! to that emission for a certified lower bound. The optimality gap is
//! `100 (1 - LB/UB)`.

mod output;

pub use output::{frontier_csv, hourly_csv, FrontierRow, ReportContext};

use crate::acopf::{
    benchmark_charging, solve_period, warm_start_from_socp, BenchmarkError, ChargeSchedule,
    PeriodSolution, PeriodSolveError, WarmStart,
};
use crate::conic::{solve_conic_with, ConicSettings, ConicSolution, SolveStatus};
use crate::formulation::{build_socp, FormulationError, MopfInstance, ObjectiveKind, VariableIndex};
use crate::nlp::NlpSettings;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Conic(#[from] crate::conic::ConicError),
    #[error("{what} solve ended with status {status:?} ({detail})")]
    SolveFailed {
        what: &'static str,
        status: SolveStatus,
        detail: String,
    },
    #[error("emission cap {cap:.3} kg is infeasible")]
    CapInfeasible { cap: f64 },
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("period subproblem failed: {0}")]
    Subproblem(#[from] PeriodSolveError),
    #[error("{0}")]
    BadConfig(String),
    #[error("{0} is zero; percentage change undefined")]
    ZeroBaseline(&'static str),
}

/// Sweep configuration; `points >= 2`, `threads` caps period parallelism.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub points: usize,
    pub threads: usize,
    pub conic: ConicSettings,
    pub nlp: NlpSettings,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            points: 10,
            threads: std::thread::available_parallelism()
                .map(|n| n.get().min(8))
                .unwrap_or(4),
            // Consistency cones sit exactly on their boundary wherever the
            // relaxation is tight, which caps the certifiable gap in double
            // precision; 1e-7 is reliably attainable there.
            conic: ConicSettings {
                tol_rel: 1e-7,
                ..ConicSettings::default()
            },
            nlp: NlpSettings::default(),
        }
    }
}

/// Cost-minimizing generation without any charging, per generator and
/// period; the reference for all emission accounting.
#[derive(Debug, Clone)]
pub struct BaselineGeneration {
    pub p: Vec<Vec<f64>>,
    pub objective: f64,
}

/// The charging-free reference computed through both solution routes. The
/// relaxed matrix feeds the cone programs' emission rows; the local matrix
/// (true losses) is what realized schedules are measured against, so a
/// difference of generations never mixes loss models.
#[derive(Debug, Clone)]
pub struct Baselines {
    pub relaxed: Vec<Vec<f64>>,
    pub local: Vec<Vec<f64>>,
    pub relaxed_cost: f64,
    /// Feasible charging-free cost, the reference for cost-change reports.
    pub local_cost: f64,
}

/// Attainable marginal-emission range `[lower, upper]` in kg.
#[derive(Debug, Clone, Copy)]
pub struct EmissionBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Per-period totals backing the hourly dump, MWh per period.
#[derive(Debug, Clone, Default)]
pub struct HourlyProfile {
    /// Generation serving the base load: total minus charging plus feed-in.
    pub gen_excl_ev: Vec<f64>,
    /// Charging draw from the grid.
    pub gen_for_ev: Vec<f64>,
    /// Grid-side feed-in (efficiency already applied).
    pub v2g_power: Vec<f64>,
}

/// One sweep outcome: a certified bound pair at one emission level.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub cap_kg: f64,
    pub ub_cost: f64,
    pub lb_cost: f64,
    pub emission_kg: f64,
    pub gap_pct: f64,
    pub period_costs: Vec<f64>,
    pub hourly: HourlyProfile,
    pub schedule: ChargeSchedule,
    pub valid: bool,
    pub invalid_reason: Option<String>,
}

impl ParetoPoint {
    fn invalid(cap_kg: f64, reason: String) -> ParetoPoint {
        ParetoPoint {
            cap_kg,
            ub_cost: f64::NAN,
            lb_cost: f64::NAN,
            emission_kg: f64::NAN,
            gap_pct: f64::NAN,
            period_costs: Vec::new(),
            hourly: HourlyProfile::default(),
            schedule: ChargeSchedule {
                charge: Vec::new(),
                discharge: Vec::new(),
                diagnostics: Vec::new(),
            },
            valid: false,
            invalid_reason: Some(reason),
        }
    }
}

/// Full sweep output.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub bounds: EmissionBounds,
    pub caps: Vec<f64>,
    pub points: Vec<ParetoPoint>,
}

/// Solves the charging-free cost problem and returns its generation matrix.
pub fn baseline_generation(instance: &MopfInstance) -> Result<BaselineGeneration, PipelineError> {
    baseline_generation_with(instance, &SweepSettings::default().conic)
}

pub fn baseline_generation_with(
    instance: &MopfInstance,
    settings: &ConicSettings,
) -> Result<BaselineGeneration, PipelineError> {
    let bare = instance.without_fleet();
    let sol = solve_socp_guidance(&bare, settings, "baseline")?;
    let idx = VariableIndex::new(&bare);
    let p = (0..bare.network.generators.len())
        .map(|g| (0..bare.horizon).map(|t| sol.primal[idx.p_gen(g, t)]).collect())
        .collect();
    Ok(BaselineGeneration {
        p,
        objective: sol.objective,
    })
}

/// Computes both baseline routes: the relaxation solve, then its recovered
/// per-period realization (which also yields the charging-free cost).
pub fn compute_baselines(
    instance: &MopfInstance,
    settings: &SweepSettings,
) -> Result<Baselines, PipelineError> {
    let bare = instance.without_fleet();
    let relax = solve_socp_guidance(&bare, &settings.conic, "baseline")?;
    let idx = VariableIndex::new(&bare);
    let relaxed: Vec<Vec<f64>> = (0..bare.network.generators.len())
        .map(|g| {
            (0..bare.horizon)
                .map(|t| relax.primal[idx.p_gen(g, t)])
                .collect()
        })
        .collect();
    let warm: Vec<WarmStart> = (0..bare.horizon)
        .map(|t| warm_start_from_socp(&bare, &idx, &relax.primal, t))
        .collect();
    let schedule = ChargeSchedule {
        charge: Vec::new(),
        discharge: Vec::new(),
        diagnostics: Vec::new(),
    };
    let periods = evaluate_schedule(&bare, &schedule, Some(&warm), settings)?;
    let local: Vec<Vec<f64>> = (0..bare.network.generators.len())
        .map(|g| (0..bare.horizon).map(|t| periods[t].p_gen[g]).collect())
        .collect();
    Ok(Baselines {
        relaxed,
        local,
        relaxed_cost: relax.objective,
        local_cost: periods.iter().map(|p| p.objective).sum(),
    })
}

fn ensure_baselines(
    instance: &mut MopfInstance,
    settings: &SweepSettings,
) -> Result<(), PipelineError> {
    if instance.baseline.is_none() || instance.baseline_local.is_none() {
        let baselines = compute_baselines(instance, settings)?;
        instance.set_baseline(baselines.relaxed);
        instance.set_baseline_local(baselines.local);
    }
    Ok(())
}

/// Lowest and highest attainable marginal emission: the minimum of the
/// emission objective (certified from the dual side), and the emission
/// realized by the unconstrained cost optimum.
pub fn emission_bounds(
    instance: &MopfInstance,
    settings: &ConicSettings,
) -> Result<EmissionBounds, PipelineError> {
    let min_emission = instance
        .with_objective(ObjectiveKind::Emission)
        .with_cap(None);
    let program = build_socp(&min_emission)?;
    let lbe_sol = solve_conic_with(&program, settings)?;
    let lbe = match lbe_sol.status {
        SolveStatus::Optimal => lbe_sol.dual_objective,
        SolveStatus::NumericalLimit if lbe_sol.dual_residual <= 1e-4 => lbe_sol.dual_objective,
        status => {
            return Err(PipelineError::SolveFailed {
                what: "emission-minimum",
                status,
                detail: format!(
                    "dres {:.2e} gap {:.2e}",
                    lbe_sol.dual_residual, lbe_sol.rel_gap
                ),
            })
        }
    };
    let cost_sol = solve_socp_guidance(
        &instance.with_objective(ObjectiveKind::Cost).with_cap(None),
        settings,
        "cost-minimum",
    )?;
    let idx = VariableIndex::new(instance);
    let p: Vec<Vec<f64>> = (0..instance.network.generators.len())
        .map(|g| {
            (0..instance.horizon)
                .map(|t| cost_sol.primal[idx.p_gen(g, t)])
                .collect()
        })
        .collect();
    let ube = instance.emission_of(&p)?;
    Ok(EmissionBounds {
        lower: lbe,
        upper: ube.max(lbe),
    })
}

/// Cost-objective relaxation solve with the emission cap pinned; the lower
/// bound provider of the sweep. Infeasible caps surface as a distinct error.
///
/// The *dual* objective is the certified bound (valid by weak duality), so
/// a solve that stalls just short of the gap tolerance is still usable when
/// its dual residual is tiny; caps sitting exactly on the attainable
/// minimum make the program degenerate and this happens routinely there.
pub fn lower_bound_with_cap(
    instance: &MopfInstance,
    cap_kg: f64,
    settings: &ConicSettings,
) -> Result<ConicSolution, PipelineError> {
    let capped = instance
        .with_objective(ObjectiveKind::Cost)
        .with_cap(Some(cap_kg));
    let program = build_socp(&capped)?;
    let sol = solve_conic_with(&program, settings)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::NumericalLimit if sol.dual_residual <= 1e-4 && sol.rel_gap <= 1e-2 => {
            Ok(sol)
        }
        SolveStatus::Infeasible => Err(PipelineError::CapInfeasible { cap: cap_kg }),
        status => Err(PipelineError::SolveFailed {
            what: "capped lower bound",
            status,
            detail: format!(
                "pres {:.2e} dres {:.2e} gap {:.2e} cap {:.3}",
                sol.primal_residual, sol.dual_residual, sol.rel_gap, cap_kg
            ),
        }),
    }
}

/// The certified lower-bound value of a capped solve.
pub fn lower_bound_value(sol: &ConicSolution) -> f64 {
    sol.dual_objective
}

/// Feasible evaluation of a fixed charging schedule: the horizon decouples,
/// so the periods are solved concurrently (bounded by the thread cap) and
/// reduced in period order.
pub fn evaluate_schedule(
    instance: &MopfInstance,
    schedule: &ChargeSchedule,
    warm: Option<&[WarmStart]>,
    settings: &SweepSettings,
) -> Result<Vec<PeriodSolution>, PipelineError> {
    let horizon = instance.horizon;
    let threads = settings.threads.clamp(1, horizon.max(1));
    let slots: Vec<std::sync::Mutex<Option<Result<PeriodSolution, PeriodSolveError>>>> =
        (0..horizon).map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let t = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if t >= horizon {
                    break;
                }
                let (charge, discharge) = schedule.column(t);
                let result = solve_period(
                    instance,
                    t,
                    &charge,
                    &discharge,
                    warm.map(|w| &w[t]),
                    &settings.nlp,
                );
                *slots[t].lock().unwrap() = Some(result);
            });
        }
    });

    let mut out = Vec::with_capacity(horizon);
    for slot in slots {
        let r = slot.into_inner().unwrap().expect("period slot filled");
        out.push(r?);
    }
    Ok(out)
}

fn hourly_profile(
    instance: &MopfInstance,
    periods: &[PeriodSolution],
    schedule: &ChargeSchedule,
) -> HourlyProfile {
    let base = instance.network.base_mva;
    let horizon = instance.horizon;
    let mut profile = HourlyProfile {
        gen_excl_ev: vec![0.0; horizon],
        gen_for_ev: vec![0.0; horizon],
        v2g_power: vec![0.0; horizon],
    };
    for t in 0..horizon {
        let total: f64 = periods[t].p_gen.iter().sum::<f64>() * base;
        let mut draw = 0.0;
        let mut feed = 0.0;
        for (s, site) in instance.sites.iter().enumerate() {
            draw += schedule.charge[s][t] * base;
            feed += site.efficiency * schedule.discharge[s][t] * base;
        }
        profile.gen_for_ev[t] = draw;
        profile.v2g_power[t] = feed;
        profile.gen_excl_ev[t] = total - draw + feed;
    }
    profile
}

fn point_from_schedule(
    instance: &MopfInstance,
    cap_kg: f64,
    schedule: ChargeSchedule,
    warm: Option<&[WarmStart]>,
    bounds: &EmissionBounds,
    settings: &SweepSettings,
) -> Result<ParetoPoint, PipelineError> {
    let periods = evaluate_schedule(instance, &schedule, warm, settings)?;
    let period_costs: Vec<f64> = periods.iter().map(|p| p.objective).collect();
    let ub_cost: f64 = period_costs.iter().sum();
    let mut emission_kg = 0.0;
    for (t, p) in periods.iter().enumerate() {
        emission_kg += instance.emission_of_period(t, &p.p_gen)?;
    }
    // The relaxation at the realized emission certifies the lower bound.
    // The clamp and the hair of slack guard against the realized emission
    // dipping under the attainable minimum by solver tolerance, which would
    // make the re-solve infeasible.
    let span = (bounds.upper - bounds.lower).abs().max(1.0);
    let lb_cap = emission_kg.max(bounds.lower) + 1e-7 * span;
    let lb = lower_bound_with_cap(instance, lb_cap, &settings.conic)?;
    let lb_cost = lower_bound_value(&lb);
    let gap_pct = 100.0 * (1.0 - lb_cost / ub_cost);
    let hourly = hourly_profile(instance, &periods, &schedule);
    Ok(ParetoPoint {
        cap_kg,
        ub_cost,
        lb_cost,
        emission_kg,
        gap_pct,
        period_costs,
        hourly,
        schedule,
        valid: true,
        invalid_reason: None,
    })
}

/// Runs the full sweep: `points` caps linearly spaced over the attainable
/// emission range, endpoints included. The instance must carry an emission
/// series; the baseline is computed here when absent.
pub fn sweep(
    instance: &MopfInstance,
    settings: &SweepSettings,
) -> Result<SweepOutcome, PipelineError> {
    if settings.points < 2 {
        return Err(PipelineError::BadConfig(
            "a sweep needs at least two points".to_string(),
        ));
    }
    let mut instance = instance.clone();
    ensure_baselines(&mut instance, settings)?;
    let bounds = emission_bounds(&instance, &settings.conic)?;
    let n = settings.points;
    // A collapsed emission range (nothing to charge) leaves only one
    // meaningful cap; sweeping it n times would duplicate the same point.
    // Degeneracy is judged against the whole-system emission magnitude, so
    // solver noise in the bounds does not masquerade as a real range.
    let emission_scale: f64 = instance
        .emissions
        .as_ref()
        .map(|e| {
            e.values
                .iter()
                .enumerate()
                .map(|(t, &et)| {
                    let load: f64 = (0..instance.loads.num_buses())
                        .map(|b| instance.loads.p[b][t])
                        .sum();
                    et * instance.network.base_mva * load
                })
                .sum()
        })
        .unwrap_or(1.0);
    let span = bounds.upper - bounds.lower;
    let degenerate = span.abs() <= 1e-6 * emission_scale.max(1.0);
    let caps: Vec<f64> = if degenerate {
        vec![bounds.upper]
    } else {
        (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                bounds.lower + f * span
            })
            .collect()
    };

    let idx = VariableIndex::new(&instance);
    let mut points = Vec::with_capacity(n);
    for &cap in &caps {
        let point = sweep_point(&instance, &idx, cap, &bounds, settings);
        points.push(match point {
            Ok(p) => p,
            Err(e) => ParetoPoint::invalid(cap, e.to_string()),
        });
    }
    Ok(SweepOutcome {
        bounds,
        caps,
        points,
    })
}

/// Guidance solves only need a near-feasible primal point: the upper bound
/// is re-certified by the local solves and the lower bound by a dual
/// re-solve, so a stall just short of the gap tolerance is acceptable when
/// the primal residual is tight. Binding caps with a flat price routinely
/// produce such degenerate optimal faces.
fn solve_socp_guidance(
    instance: &MopfInstance,
    settings: &ConicSettings,
    what: &'static str,
) -> Result<ConicSolution, PipelineError> {
    let program = build_socp(instance)?;
    let sol = solve_conic_with(&program, settings)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::NumericalLimit if sol.primal_residual <= 1e-5 && sol.rel_gap <= 1e-2 => {
            Ok(sol)
        }
        SolveStatus::Infeasible if instance.emission_cap_kg.is_some() => {
            Err(PipelineError::CapInfeasible {
                cap: instance.emission_cap_kg.unwrap(),
            })
        }
        status => Err(PipelineError::SolveFailed {
            what,
            status,
            detail: format!(
                "pres {:.2e} dres {:.2e} gap {:.2e}",
                sol.primal_residual, sol.dual_residual, sol.rel_gap
            ),
        }),
    }
}

fn sweep_point(
    instance: &MopfInstance,
    idx: &VariableIndex,
    cap: f64,
    bounds: &EmissionBounds,
    settings: &SweepSettings,
) -> Result<ParetoPoint, PipelineError> {
    let relax = solve_socp_guidance(
        &instance
            .with_objective(ObjectiveKind::Cost)
            .with_cap(Some(cap)),
        &settings.conic,
        "capped relaxation",
    )?;
    let horizon = instance.horizon;
    let n_site = instance.sites.len();
    let charge: Vec<Vec<f64>> = (0..n_site)
        .map(|s| {
            (0..horizon)
                .map(|t| relax.primal[idx.charge(s, t)].max(0.0))
                .collect()
        })
        .collect();
    let discharge: Vec<Vec<f64>> = (0..n_site)
        .map(|s| {
            (0..horizon)
                .map(|t| relax.primal[idx.discharge(s, t)].max(0.0))
                .collect()
        })
        .collect();
    let schedule = ChargeSchedule {
        charge,
        discharge,
        diagnostics: Vec::new(),
    };
    let warm: Vec<WarmStart> = (0..horizon)
        .map(|t| warm_start_from_socp(instance, idx, &relax.primal, t))
        .collect();
    point_from_schedule(instance, cap, schedule, Some(&warm), bounds, settings)
}

/// Evaluates the midnight-charging benchmark through the same machinery as
/// a sweep point: per-period solves for the cost, then a capped relaxation
/// at the realized emission for a comparable bound pair.
pub fn benchmark_point(
    instance: &MopfInstance,
    settings: &SweepSettings,
) -> Result<ParetoPoint, PipelineError> {
    let mut instance = instance.clone();
    ensure_baselines(&mut instance, settings)?;
    let bounds = emission_bounds(&instance, &settings.conic)?;
    let schedule = benchmark_charging(&instance)?;
    // Re-solve the relaxation around the pinned schedule purely for warm
    // starts; failures here only cost the warm start.
    let warm = solve_socp_guidance(
        &instance
            .with_pinned_schedule(&schedule.charge, &schedule.discharge)
            .with_objective(ObjectiveKind::Cost),
        &settings.conic,
        "pinned-schedule relaxation",
    )
    .ok()
    .map(|sol| {
        let idx = VariableIndex::new(&instance);
        (0..instance.horizon)
            .map(|t| warm_start_from_socp(&instance, &idx, &sol.primal, t))
            .collect::<Vec<_>>()
    });
    point_from_schedule(
        &instance,
        f64::NAN,
        schedule,
        warm.as_deref(),
        &bounds,
        settings,
    )
}

/// Feasible cost of the charging-free system via the per-period local
/// solves (the reference for cost-change percentages).
pub fn no_ev_cost(
    instance: &MopfInstance,
    settings: &SweepSettings,
) -> Result<f64, PipelineError> {
    Ok(compute_baselines(instance, settings)?.local_cost)
}

/// Percentage changes against the charging-free cost and the equivalent
/// combustion-fleet emission.
///
/// `gasoline_g_per_mile` is in grams CO2 per mile; `total_miles` is the
/// (survey-weighted) fleet mileage, so the reference emission is
/// `g_per_mile * miles / 1000` kg.
pub fn percent_changes(
    cost_with: f64,
    cost_without: f64,
    emission_kg: f64,
    gasoline_g_per_mile: f64,
    total_miles: f64,
) -> Result<(f64, f64), PipelineError> {
    if cost_without <= 0.0 {
        return Err(PipelineError::ZeroBaseline("charging-free cost"));
    }
    let gasoline_kg = gasoline_g_per_mile * total_miles / 1000.0;
    if gasoline_kg <= 0.0 {
        return Err(PipelineError::ZeroBaseline("combustion-fleet emission"));
    }
    Ok((
        100.0 * (cost_with / cost_without - 1.0),
        100.0 * (emission_kg / gasoline_kg - 1.0),
    ))
}
