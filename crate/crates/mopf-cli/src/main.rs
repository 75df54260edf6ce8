//! Batch front door: case inspection, driving-profile synthesis, single
//! relaxation solves, benchmark evaluation, and full cap sweeps.
//!
//! Exit codes: 0 success, 1 input error, 2 solver failure.

mod config;
mod scenario;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use mopf::conic::ConicSettings;
use mopf::fleet::{duration_matrix, energy_matrix, filter_trips, parse_trips_csv};
use mopf::formulation::{build_socp, consistency_residuals, ObjectiveKind, VariableIndex};
use mopf::pareto::{
    benchmark_point, compute_baselines, frontier_csv, hourly_csv, sweep, FrontierRow,
    PipelineError, ReportContext, SweepSettings,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mopf", version, about = "Multi-period OPF with fleet charging")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Parse a case file and report structure and diagnostics.
    Inspect {
        /// Path to the case file.
        case: PathBuf,
    },
    /// Synthesize hourly energy-requirement profiles from trip records.
    Profiles(ProfilesArgs),
    /// Solve one relaxation instance and dump the solution.
    Solve(SolveArgs),
    /// Evaluate the midnight-charging benchmark schedule.
    Benchmark(CommonArgs),
    /// Sweep emission caps and write the trade-off frontier.
    Pareto(ParetoArgs),
}

#[derive(Args)]
struct ProfilesArgs {
    /// Trip CSV (vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag).
    #[arg(long)]
    trips: PathBuf,
    #[arg(long, default_value_t = 32.0)]
    battery_kwh: f64,
    #[arg(long, default_value_t = 0.3)]
    consumption_kwh_per_mile: f64,
    #[arg(long, default_value_t = 24)]
    horizon: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Thread cap override.
    #[arg(long)]
    threads: Option<usize>,
    /// Sweep point count override.
    #[arg(long)]
    points: Option<usize>,
    /// Season override (summer|winter).
    #[arg(long)]
    season: Option<String>,
    /// Disable feed-in (grid-to-vehicle only).
    #[arg(long)]
    no_v2g: bool,
    /// Remove the fleet entirely (charging-free run).
    #[arg(long)]
    no_ev: bool,
    /// Relative gap tolerance override.
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Feasibility tolerance override.
    #[arg(long)]
    tol_feas: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Objective: cost or emission.
    #[arg(long, default_value = "cost")]
    objective: String,
    /// Emission cap in kg.
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args)]
struct ParetoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also evaluate and append the midnight-charging benchmark row.
    #[arg(long)]
    benchmark: bool,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Input(String),
    Solver(String),
}

impl From<scenario::ScenarioError> for CliError {
    fn from(e: scenario::ScenarioError) -> Self {
        match e {
            scenario::ScenarioError::Input(m) => CliError::Input(m),
            scenario::ScenarioError::Internal(m) => CliError::Solver(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::BadConfig(m) => CliError::Input(m),
            other => CliError::Solver(other.to_string()),
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Commands::Inspect { case } => cmd_inspect(&case),
        Commands::Profiles(args) => cmd_profiles(&args),
        Commands::Solve(args) => cmd_solve(&args),
        Commands::Benchmark(args) => cmd_benchmark(&args),
        Commands::Pareto(args) => cmd_pareto(&args),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_file(&common.config).map_err(input_err)?;
    cfg.apply_env();
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    if let Some(points) = common.points {
        cfg.sweep_points = points;
    }
    if let Some(season) = &common.season {
        cfg.season = config::Season::parse(season).map_err(input_err)?;
    }
    if common.no_v2g {
        cfg.v2g_enabled = false;
    }
    if common.no_ev {
        cfg.ev_enabled = false;
    }
    if let Some(t) = common.tol_rel {
        cfg.tol_rel = t;
    }
    if let Some(t) = common.tol_feas {
        cfg.tol_feas = t;
    }
    cfg.validate().map_err(input_err)?;
    Ok(cfg)
}

fn sweep_settings(cfg: &RunConfig) -> SweepSettings {
    SweepSettings {
        points: cfg.sweep_points,
        threads: cfg.threads,
        conic: ConicSettings {
            tol_rel: cfg.tol_rel,
            tol_feas: cfg.tol_feas,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn cmd_inspect(case: &PathBuf) -> Result<(), CliError> {
    let text = std::fs::read_to_string(case)
        .map_err(|e| CliError::Input(format!("{}: {e}", case.display())))?;
    let network = mopf::case::parse_case(&text).map_err(input_err)?;
    let load_mw = network.total_load_p() * network.base_mva;
    println!(
        "buses={} lines={} gens={} base_mva={} total_load_mw={:.3} load_buses={}",
        network.buses.len(),
        network.lines.len(),
        network.generators.len(),
        network.base_mva,
        load_mw,
        network.load_buses().len()
    );
    let diagnostics = mopf::case::validate(&network);
    for d in &diagnostics {
        println!("diagnostic: {d}");
    }
    if diagnostics.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{} diagnostic(s) reported",
            diagnostics.len()
        )))
    }
}

fn cmd_profiles(args: &ProfilesArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.trips)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.trips.display())))?;
    let trips = parse_trips_csv(&text, args.horizon as f64).map_err(input_err)?;
    let filtered = filter_trips(&trips, args.battery_kwh, args.consumption_kwh_per_mile);
    let overlap = duration_matrix(&filtered, args.horizon);
    let matrix =
        energy_matrix(&filtered, overlap, args.consumption_kwh_per_mile).map_err(input_err)?;

    let mut out = String::from("vehicle_id,hour,energy_kwh\n");
    for (v, &vid) in matrix.vehicle_ids.iter().enumerate() {
        for t in 0..args.horizon {
            out.push_str(&format!("{vid},{t},{:.6}\n", matrix.energy[v][t]));
        }
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &out)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            eprintln!(
                "profiles: {} trips in, {} kept, {} vehicles -> {}",
                trips.len(),
                filtered.len(),
                matrix.vehicle_ids.len(),
                path.display()
            );
        }
        None => print!("{out}"),
    }
    Ok(())
}

fn write_out(dir: &PathBuf, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn manifest(cfg: &RunConfig, scen: &scenario::Scenario, extra: &str, elapsed: f64) -> String {
    format!(
        "mopf {}\n\n[config]\n{}\n[derived]\nweight = {:.9}\ngrid_total = {:.3}\n\
         fleet_energy_kwh = {:.3}\ntotal_miles = {:.3}\n{extra}\n[timing]\nelapsed_s = {elapsed:.3}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.manifest_echo(),
        scen.weight,
        scen.grid_total,
        scen.fleet
            .iter()
            .map(|g| g.total_energy_need())
            .sum::<f64>(),
        scen.total_miles,
    )
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let scen = scenario::build(&cfg)?;
    let settings = sweep_settings(&cfg);
    let started = std::time::Instant::now();

    let mut instance = scen.instance.clone();
    let baselines = compute_baselines(&instance, &settings)?;
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);

    let objective = match args.objective.to_ascii_lowercase().as_str() {
        "cost" => ObjectiveKind::Cost,
        "emission" => ObjectiveKind::Emission,
        other => {
            return Err(CliError::Input(format!(
                "unknown objective `{other}` (cost|emission)"
            )))
        }
    };
    let target = instance.with_objective(objective).with_cap(args.cap);
    let program = build_socp(&target).map_err(|e| CliError::Solver(e.to_string()))?;
    let sol = mopf::conic::solve_conic_with(&program, &settings.conic)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let idx = VariableIndex::new(&target);
    let residuals = consistency_residuals(&target, &idx, &sol.primal);

    println!(
        "status={:?} objective={:.6} dual={:.6} rel_gap={:.3e} iterations={} time_s={:.3}",
        sol.status, sol.objective, sol.dual_objective, sol.rel_gap, sol.iterations, sol.solve_time
    );
    println!(
        "consistency: max={:.3e} mean={:.3e} exact={}",
        residuals.max, residuals.mean, residuals.exact
    );
    let dump = mopf::conic::solution_dump(&program, &sol);
    write_out(&cfg.out_dir, "solution.txt", &dump)?;
    write_out(
        &cfg.out_dir,
        "manifest.txt",
        &manifest(
            &cfg,
            &scen,
            &format!("command = solve {objective:?} cap={:?}\n", args.cap),
            started.elapsed().as_secs_f64(),
        ),
    )?;
    // Near-converged stalls are normal on degenerate cone boundaries; the
    // dump and the printed metrics describe the point either way.
    match sol.status {
        mopf::conic::SolveStatus::Optimal => Ok(()),
        mopf::conic::SolveStatus::NumericalLimit
            if sol.primal_residual <= 1e-5 && sol.rel_gap <= 1e-2 =>
        {
            Ok(())
        }
        status => Err(CliError::Solver(format!("solve ended with {status:?}"))),
    }
}

fn report_context(
    cfg: &RunConfig,
    scen: &scenario::Scenario,
    no_ev_cost: f64,
) -> Option<ReportContext> {
    cfg.gasoline_g_per_mile.map(|g| ReportContext {
        no_ev_cost,
        gasoline_g_per_mile: g,
        total_miles: scen.total_miles,
    })
}

fn cmd_benchmark(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let scen = scenario::build(&cfg)?;
    let settings = sweep_settings(&cfg);
    let started = std::time::Instant::now();

    let mut instance = scen.instance.clone();
    let baselines = compute_baselines(&instance, &settings)?;
    let no_ev = baselines.local_cost;
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);

    let point = benchmark_point(&instance, &settings)?;
    for d in &point.schedule.diagnostics {
        eprintln!("benchmark: {d}");
    }
    let rows = vec![FrontierRow {
        point: point.clone(),
        tag: "benchmark",
    }];
    let ctx = report_context(&cfg, &scen, no_ev);
    let csv = frontier_csv(&rows, ctx.as_ref())?;
    write_out(&cfg.out_dir, "frontier.csv", &csv)?;
    write_out(&cfg.out_dir, "benchmark_hourly.csv", &hourly_csv(&point))?;
    write_out(
        &cfg.out_dir,
        "manifest.txt",
        &manifest(
            &cfg,
            &scen,
            &format!(
                "command = benchmark\nbenchmark_cost = {:.6}\nbenchmark_emission_kg = {:.6}\n",
                point.ub_cost, point.emission_kg
            ),
            started.elapsed().as_secs_f64(),
        ),
    )?;
    println!(
        "benchmark: cost={:.3} emission_kg={:.3} gap_pct={:.4}",
        point.ub_cost, point.emission_kg, point.gap_pct
    );
    Ok(())
}

fn cmd_pareto(args: &ParetoArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let scen = scenario::build(&cfg)?;
    let settings = sweep_settings(&cfg);
    let started = std::time::Instant::now();

    let mut instance = scen.instance.clone();
    let baselines = compute_baselines(&instance, &settings)?;
    let no_ev = baselines.local_cost;
    instance.set_baseline(baselines.relaxed);
    instance.set_baseline_local(baselines.local);

    let outcome = sweep(&instance, &settings)?;
    let mut rows: Vec<FrontierRow> = outcome
        .points
        .iter()
        .map(|p| FrontierRow {
            point: p.clone(),
            tag: "sweep",
        })
        .collect();
    if args.benchmark {
        let point = benchmark_point(&instance, &settings)?;
        rows.push(FrontierRow {
            point,
            tag: "benchmark",
        });
    }

    let valid = rows.iter().filter(|r| r.point.valid).count();
    let ctx = report_context(&cfg, &scen, no_ev);
    let csv = frontier_csv(&rows, ctx.as_ref())?;
    write_out(&cfg.out_dir, "frontier.csv", &csv)?;
    for (k, row) in rows.iter().enumerate() {
        if row.point.valid {
            let name = if row.tag == "benchmark" {
                "benchmark_hourly.csv".to_string()
            } else {
                format!("point_{k:02}_hourly.csv")
            };
            write_out(&cfg.out_dir, &name, &hourly_csv(&row.point))?;
        }
    }
    write_out(
        &cfg.out_dir,
        "manifest.txt",
        &manifest(
            &cfg,
            &scen,
            &format!(
                "command = pareto\nlbe_kg = {:.6}\nube_kg = {:.6}\nvalid_points = {valid}\nno_ev_cost = {no_ev:.6}\n",
                outcome.bounds.lower, outcome.bounds.upper
            ),
            started.elapsed().as_secs_f64(),
        ),
    )?;

    for (k, p) in outcome.points.iter().enumerate() {
        if p.valid {
            println!(
                "point {k}: cap_kg={:.3} ub={:.3} lb={:.3} emission_kg={:.3} gap_pct={:.4}",
                p.cap_kg, p.ub_cost, p.lb_cost, p.emission_kg, p.gap_pct
            );
        } else {
            println!(
                "point {k}: invalid ({})",
                p.invalid_reason.as_deref().unwrap_or("unknown")
            );
        }
    }
    if valid == 0 {
        return Err(CliError::Solver("no valid sweep points".to_string()));
    }
    if outcome.points.len() == 1 && cfg.sweep_points > 1 {
        eprintln!(
            "warning: attainable emission range is degenerate; single-point frontier"
        );
    }
    if scen.fleet.iter().map(|g| g.total_energy_need()).sum::<f64>() <= 0.0 {
        eprintln!("warning: fleet has no driving demand");
    }
    Ok(())
}
