//! File-level contracts of the command layer: artifact names and headers,
//! exit codes for every outcome class, CSV/metrics sentinels, config
//! round-tripping, and the installed binary's argument handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use eapf_cli::{
    cmd_compare, cmd_export_trajectory, cmd_run, COMPARISON_HEADER, EXIT_COLLISION, EXIT_CONFIG,
    EXIT_OK, EXIT_PLANNER,
};
use eapf_core::{PlanMode, ScenarioConfig, SimLog};
use tempfile::tempdir;

/// Planar two-link arm: 0.8 m and 0.5 m links rotating in the XY plane,
/// gravity off so runs are cheap and joint-decoupled.
const ROBOT_TOML: &str = r#"
version = 1
name = "planar-2dof"
gravity = [0.0, 0.0, 0.0]

[ee_offset]
translation = [0.5, 0.0, 0.0]
rotation_rpy = [0.0, 0.0, 0.0]

[[links]]
alpha_prev = 0.0
a_prev = 0.0
d = 0.0
theta_offset = 0.0
mass = 1.2
com = [0.4, 0.0, 0.0]
inertia = { ixx = 0.001, iyy = 0.07, izz = 0.07, ixy = 0.0, ixz = 0.0, iyz = 0.0 }

[[links]]
alpha_prev = 0.0
a_prev = 0.8
d = 0.0
theta_offset = 0.0
mass = 0.8
com = [0.25, 0.0, 0.0]
inertia = { ixx = 0.001, iyy = 0.02, izz = 0.02, ixy = 0.0, ixz = 0.0, iyz = 0.0 }
"#;

/// Short unobstructed move; the sphere sits below the swept arc and never
/// interacts.
const BASIC_SCENARIO: &str = r#"
version = 1
name = "planar-basic"
robot = "planar_2dof.toml"

q_start = [0.0, 0.0]
q_goal = [0.9, 0.4]

[field]
k_a = 5.0
k_r = 10.0
rho0 = 0.4
gamma = 0.8
mu_base = 1.0
damping = 0.5
dt_plan = 0.001
t_max_plan = 10.0
goal_tol = 0.05

[gains.apf]
kp = 25.0
kd = 10.0

[gains.eapf]
kp = 49.0
kd = 11.2

[optimizer]
lambda = 100.0
knot_count = 10
vel_max = 10.0
acc_max = 50.0
t_max = 10.0

[simulation]
dt = 0.001
t_extra = 0.5
arrival_tol = 0.05

[[obstacles]]
type = "sphere"
center = [0.6, -0.5, 0.0]
radius = 0.1
"#;

/// Write the robot file plus a scenario body into `dir`, returning the
/// scenario path.
fn write_fixture(dir: &Path, scenario_body: &str) -> PathBuf {
    fs::write(dir.join("planar_2dof.toml"), ROBOT_TOML).unwrap();
    let path = dir.join("scene.toml");
    fs::write(&path, scenario_body).unwrap();
    path
}

/// Every data row must have the header's column count and parse as finite
/// floats.
fn assert_csv_well_formed(path: &Path, expected_header: &str) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    assert_eq!(header, expected_header, "bad header in {}", path.display());
    let cols = header.split(',').count();
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(
            fields.len(),
            cols,
            "row with wrong column count in {}",
            path.display()
        );
        for f in fields {
            let v: f64 = f.parse().expect("numeric CSV field");
            assert!(v.is_finite(), "non-finite value in {}", path.display());
        }
        rows += 1;
    }
    assert!(rows > 0, "{} has no data rows", path.display());
}

#[test]
fn run_writes_artifacts_with_documented_headers() {
    let dir = tempdir().unwrap();
    let scenario = write_fixture(dir.path(), BASIC_SCENARIO);
    let out = dir.path().join("out");

    let code = cmd_run(&scenario, PlanMode::Eapf, &out);
    assert_eq!(code, EXIT_OK);

    assert_csv_well_formed(&out.join("waypoints.csv"), "t,q1,q2,qd1,qd2,f1,f2");
    assert_csv_well_formed(
        &out.join("trajectory.csv"),
        "t,q_d1,q_d2,qdot_d1,qdot_d2,qddot_d1,qddot_d2",
    );
    assert_csv_well_formed(&out.join("simlog.csv"), &SimLog::csv_header(2));

    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    for key in [
        "arrival_time",
        "min_clearance",
        "collision_free",
        "jerk_integral",
        "max_vel",
        "max_acc",
        "final_error",
    ] {
        assert!(metrics.contains(&format!("{key} = ")), "missing {key}");
    }
    assert!(metrics.contains("collision_free = true"));
}

#[test]
fn run_with_identical_start_and_goal_arrives_at_zero() {
    let dir = tempdir().unwrap();
    let body = BASIC_SCENARIO.replace("q_goal = [0.9, 0.4]", "q_goal = [0.0, 0.0]");
    let scenario = write_fixture(dir.path(), &body);
    let out = dir.path().join("out");

    let code = cmd_run(&scenario, PlanMode::Apf, &out);
    assert_eq!(code, EXIT_OK);
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(
        metrics.contains("arrival_time = 0\n"),
        "expected zero arrival, got:\n{metrics}"
    );
}

#[test]
fn run_with_obstacle_on_start_reports_collision() {
    let dir = tempdir().unwrap();
    // Sphere centred on the start end-effector position (1.3, 0, 0); the
    // near-zero repulsive gain keeps the planner itself well behaved so the
    // run reaches the simulator, which must flag the immediate penetration.
    let body = BASIC_SCENARIO
        .replace("center = [0.6, -0.5, 0.0]", "center = [1.3, 0.0, 0.0]")
        .replace("radius = 0.1", "radius = 0.05")
        .replace("k_r = 10.0", "k_r = 1e-9");
    let scenario = write_fixture(dir.path(), &body);
    let out = dir.path().join("out");

    let code = cmd_run(&scenario, PlanMode::Eapf, &out);
    assert_eq!(code, EXIT_COLLISION);
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("collision_free = false"));
}

#[test]
fn config_errors_exit_with_config_code() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");

    // Malformed TOML.
    let scenario = write_fixture(dir.path(), "version = ");
    assert_eq!(cmd_run(&scenario, PlanMode::Apf, &out), EXIT_CONFIG);

    // Unknown key.
    let body = format!("{BASIC_SCENARIO}\nunknown_knob = 1.0\n");
    let scenario = write_fixture(dir.path(), &body);
    assert_eq!(cmd_run(&scenario, PlanMode::Apf, &out), EXIT_CONFIG);

    // Joint-count mismatch between scenario and robot.
    let body = BASIC_SCENARIO.replace("q_start = [0.0, 0.0]", "q_start = [0.0, 0.0, 0.0]");
    let scenario = write_fixture(dir.path(), &body);
    assert_eq!(cmd_run(&scenario, PlanMode::Apf, &out), EXIT_CONFIG);

    // Missing robot file.
    let body = BASIC_SCENARIO.replace("planar_2dof.toml", "no_such_robot.toml");
    let scenario = write_fixture(dir.path(), &body);
    assert_eq!(cmd_run(&scenario, PlanMode::Apf, &out), EXIT_CONFIG);
}

#[test]
fn compare_writes_rows_and_per_mode_artifacts() {
    let dir = tempdir().unwrap();
    let scenario = write_fixture(dir.path(), BASIC_SCENARIO);
    let out = dir.path().join("out");

    let code = cmd_compare(&scenario, &out);
    assert_eq!(code, EXIT_OK);

    let text = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], COMPARISON_HEADER);
    assert!(lines[1].starts_with("apf,true,true,"));
    assert!(lines[2].starts_with("eapf,true,true,"));

    for mode in ["apf", "eapf"] {
        for file in ["waypoints.csv", "trajectory.csv", "simlog.csv", "metrics.txt"] {
            assert!(
                out.join(mode).join(file).is_file(),
                "missing {mode}/{file}"
            );
        }
    }
}

#[test]
fn compare_reports_inf_clearance_for_empty_scene() {
    let dir = tempdir().unwrap();
    let body = BASIC_SCENARIO.split("[[obstacles]]").next().unwrap().to_string();
    let scenario = write_fixture(dir.path(), &body);
    let out = dir.path().join("out");

    let code = cmd_compare(&scenario, &out);
    assert_eq!(code, EXIT_OK);

    let text = fs::read_to_string(out.join("comparison.csv")).unwrap();
    for line in text.lines().skip(1) {
        assert!(
            line.contains(",inf,"),
            "expected inf clearance sentinel in: {line}"
        );
    }
}

#[test]
fn scenario_config_round_trips_exactly() {
    for text in [
        BASIC_SCENARIO.to_string(),
        fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/gen3_reference_scene.toml"),
        )
        .unwrap(),
    ] {
        let first = ScenarioConfig::from_toml_str(&text).unwrap();
        let serialized = first.to_toml_string().unwrap();
        let second = ScenarioConfig::from_toml_str(&serialized).unwrap();
        assert_eq!(first, second, "config changed across serialize/parse");
    }
}

#[test]
fn export_trajectory_validates_rate_and_samples_uniformly() {
    let dir = tempdir().unwrap();
    let scenario = write_fixture(dir.path(), BASIC_SCENARIO);
    let out = dir.path().join("out");

    for bad in [0.0, -5.0, f64::NAN] {
        assert_eq!(
            cmd_export_trajectory(&scenario, PlanMode::Apf, &out, bad),
            EXIT_CONFIG,
            "rate {bad} must be rejected"
        );
        assert!(!out.join("trajectory.csv").exists());
    }

    let code = cmd_export_trajectory(&scenario, PlanMode::Apf, &out, 500.0);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let times: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(times.len() > 2);
    assert_eq!(times[0], 0.0);
    assert!((times[1] - times[0] - 1.0 / 500.0).abs() < 1e-12);
    assert!(
        times.windows(2).all(|w| w[1] > w[0]),
        "timestamps must increase strictly"
    );
}

#[test]
fn export_trajectory_still_writes_on_planner_timeout() {
    let dir = tempdir().unwrap();
    // A 10 ms planning budget cannot reach the goal; the partial path must
    // still be optimized and exported so the failure is inspectable.
    let body = BASIC_SCENARIO.replace("t_max_plan = 10.0", "t_max_plan = 0.01");
    let scenario = write_fixture(dir.path(), &body);
    let out = dir.path().join("out");

    let code = cmd_export_trajectory(&scenario, PlanMode::Eapf, &out, 1000.0);
    assert_eq!(code, EXIT_PLANNER);
    assert!(out.join("trajectory.csv").is_file());
}

#[test]
fn binary_maps_usage_errors_to_config_exit_code() {
    let bin = env!("CARGO_BIN_EXE_eapf");
    let dir = tempdir().unwrap();
    let scenario = write_fixture(dir.path(), BASIC_SCENARIO);
    let out = dir.path().join("out");

    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));

    let none = Command::new(bin).output().unwrap();
    assert_eq!(none.status.code(), Some(EXIT_CONFIG));

    let bad_mode = Command::new(bin)
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--mode", "banana", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(bad_mode.status.code(), Some(EXIT_CONFIG));

    let ok = Command::new(bin)
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--mode", "apf", "--out"])
        .arg(&out)
        .args(["--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(out.join("metrics.txt").is_file());
}
