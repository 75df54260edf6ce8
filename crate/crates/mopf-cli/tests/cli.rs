//! End-to-end command tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mopf"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../mopf/tests/fixtures")
        .join(name)
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn demand_csv(values: &[f64]) -> String {
    let mut s = String::from("hour,value\n");
    for (h, v) in values.iter().enumerate() {
        s.push_str(&format!("{h},{v}\n"));
    }
    s
}

/// A small self-contained run directory: the 3-bus case, night-peaked
/// demand, valley emissions, and two commuter vehicles with large survey
/// weights.
fn setup_run_dir(dir: &Path, points: usize) -> PathBuf {
    let summer: Vec<f64> = [
        1.00, 0.99, 0.98, 0.97, 0.96, 0.94, 0.90, 0.86, 0.80, 0.74, 0.68, 0.64, 0.62, 0.61, 0.62,
        0.64, 0.68, 0.74, 0.80, 0.86, 0.90, 0.94, 0.97, 0.99,
    ]
    .iter()
    .map(|v| v * 1000.0)
    .collect();
    let winter: Vec<f64> = summer.iter().map(|v| 0.8 * v).collect();
    let emissions = vec![
        900.0, 890.0, 880.0, 870.0, 860.0, 840.0, 800.0, 750.0, 680.0, 600.0, 540.0, 500.0, 480.0,
        470.0, 480.0, 500.0, 540.0, 600.0, 680.0, 750.0, 800.0, 840.0, 870.0, 890.0,
    ];
    std::fs::copy(fixture("case3.m"), dir.join("case3.m")).unwrap();
    write(dir, "demand_summer.csv", &demand_csv(&summer));
    write(dir, "demand_winter.csv", &demand_csv(&winter));
    write(dir, "emissions_summer.csv", &demand_csv(&emissions));
    write(dir, "emissions_winter.csv", &demand_csv(&emissions));
    write(
        dir,
        "trips.csv",
        "vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag\n\
         1,1,7.0,8.5,12.0,6000,car,1\n\
         1,2,17.0,18.5,12.0,6000,car,1\n\
         2,3,7.5,8.75,15.0,5000,suv,1\n\
         2,4,17.5,18.75,15.0,5000,suv,1\n",
    );
    write(
        dir,
        "run.conf",
        &format!(
            "[paths]\ncase = case3.m\ndemand_summer = demand_summer.csv\n\
             demand_winter = demand_winter.csv\nemissions_summer = emissions_summer.csv\n\
             emissions_winter = emissions_winter.csv\ntrips = trips.csv\nout_dir = out\n\n\
             [scenario]\nseason = summer\ngasoline_g_per_mile = 404\n\n\
             [solver]\nsweep_points = {points}\nthreads = 4\n"
        ),
    )
}

#[test]
fn inspect_reports_counts_and_exits_zero() {
    let out = bin()
        .arg("inspect")
        .arg(fixture("case2.m"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("buses=2 lines=1 gens=2"), "{stdout}");
}

#[test]
fn inspect_broken_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.m", "mpc.baseMVA = 100;\nmpc.bus = [\n1 banana;\n];\n");
    let out = bin().arg("inspect").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn profiles_writes_hourly_energies() {
    let dir = tempfile::tempdir().unwrap();
    let trips = write(
        dir.path(),
        "trips.csv",
        "vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag\n\
         1,1,7.5,8.25,15.0,1.0,car,1\n",
    );
    let out_csv = dir.path().join("omega.csv");
    let out = bin()
        .arg("profiles")
        .arg("--trips")
        .arg(&trips)
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("vehicle_id,hour,energy_kwh\n"));
    // 20 mph for half the 7-8 hour at 0.3 kWh/mile.
    assert!(text.contains("1,7,3.000000"), "{text}");
    assert!(text.contains("1,8,1.500000"));
}

#[test]
fn pareto_writes_frontier_and_manifest_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let conf = setup_run_dir(dir.path(), 3);
    let run = |out_name: &str| -> String {
        let out_dir = dir.path().join(out_name);
        let out = bin()
            .arg("pareto")
            .arg("--config")
            .arg(&conf)
            .arg("--out")
            .arg(&out_dir)
            .arg("--benchmark")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read_to_string(out_dir.join("frontier.csv")).unwrap()
    };
    let a = run("out_a");
    let b = run("out_b");
    assert_eq!(a, b, "sweep output must be reproducible");
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,tag"
    );
    // 3 sweep rows + 1 benchmark row.
    assert_eq!(lines.len(), 5);
    assert!(lines[4].ends_with(",benchmark"));
    assert!(lines[1].ends_with(",sweep"));
    let out_dir = dir.path().join("out_a");
    assert!(out_dir.join("manifest.txt").exists());
    assert!(out_dir.join("point_00_hourly.csv").exists());
    assert!(out_dir.join("benchmark_hourly.csv").exists());
    let hourly = std::fs::read_to_string(out_dir.join("point_00_hourly.csv")).unwrap();
    assert!(hourly.starts_with("period,gen_excl_ev,gen_for_ev,v2g_power\n"));
    assert_eq!(hourly.lines().count(), 25);
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("sweep_points = 3"));
    assert!(manifest.contains("weight ="));
}

#[test]
fn benchmark_command_writes_tagged_row() {
    let dir = tempfile::tempdir().unwrap();
    let conf = setup_run_dir(dir.path(), 2);
    let out_dir = dir.path().join("bench_out");
    let out = bin()
        .arg("benchmark")
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("frontier.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",benchmark"));
    assert!(out_dir.join("benchmark_hourly.csv").exists());
}

#[test]
fn missing_config_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write(dir.path(), "bad.conf", "[paths]\ncase = nope.m\n");
    let out = bin()
        .arg("pareto")
        .arg("--config")
        .arg(&conf)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_command_dumps_solution() {
    let dir = tempfile::tempdir().unwrap();
    let conf = setup_run_dir(dir.path(), 2);
    let out_dir = dir.path().join("solve_out");
    let out = bin()
        .arg("solve")
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("status="), "{stdout}");
    assert!(stdout.contains("consistency:"), "{stdout}");
    let dump = std::fs::read_to_string(out_dir.join("solution.txt")).unwrap();
    assert!(dump.starts_with("status "));
    assert!(dump.contains("pg0_t0 "));
}
