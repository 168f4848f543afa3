//! Command-line pipeline driver: scenario files in, CSV/text artifacts out.
//!
//! Three entry points mirror the binary's subcommands: [`cmd_run`] executes
//! one planning mode end to end, [`cmd_compare`] executes both modes and
//! tabulates them side by side, and [`cmd_export_trajectory`] plans and
//! optimizes without simulating. Each returns a process exit code instead of
//! terminating so the logic stays testable; diagnostics go to stderr.
//!
//! All floating-point output uses Rust's shortest round-trip formatting, so
//! identical results serialize byte-identically across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use eapf_core::{
    parse_scenario, plan_and_optimize, run_pipeline, Error, PipelineResult, PlanMode,
    RobotModel, Scene, ScenarioConfig, Trajectory, Waypoints,
};
use nalgebra::DVector;

/// Planner converged, the simulated arm arrived, and no control point ever
/// penetrated an obstacle.
pub const EXIT_OK: i32 = 0;
/// Pipeline failure short of a collision: planner time-out, no feasible
/// trajectory duration, a diverged state, or an arm that never settled at
/// the goal.
pub const EXIT_PLANNER: i32 = 1;
/// A control point penetrated an obstacle during the executed motion.
pub const EXIT_COLLISION: i32 = 2;
/// Unreadable, unparsable or invalid scenario/robot file, an invalid
/// command-line value, or an output write failure.
pub const EXIT_CONFIG: i32 = 3;

/// Exit code for a hard pipeline error. File and validation problems are
/// config errors; everything else counts as a planner failure.
fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_PLANNER,
    }
}

/// Exit code for a completed pipeline run. A collision outranks a missed
/// goal: a trajectory that hits an obstacle is rejected even if the arm
/// arrives.
pub fn run_exit_code(result: &PipelineResult) -> i32 {
    if !result.metrics.collision_free {
        EXIT_COLLISION
    } else if !result.waypoints.converged || result.metrics.arrival_time.is_none() {
        EXIT_PLANNER
    } else {
        EXIT_OK
    }
}

/// A parsed scenario with its start/goal vectors ready for the pipeline.
struct LoadedScenario {
    config: ScenarioConfig,
    model: RobotModel,
    scene: Scene,
    q_start: DVector<f64>,
    q_goal: DVector<f64>,
}

fn load(scenario: &Path) -> eapf_core::Result<LoadedScenario> {
    let (config, model, scene) = parse_scenario(scenario)?;
    let q_start = DVector::from_vec(config.q_start.clone());
    let q_goal = DVector::from_vec(config.q_goal.clone());
    Ok(LoadedScenario {
        config,
        model,
        scene,
        q_start,
        q_goal,
    })
}

/// Parse the scenario and run the full pipeline in `mode`, producing every
/// intermediate artifact. No files are written.
pub fn run_scenario(scenario: &Path, mode: PlanMode) -> eapf_core::Result<PipelineResult> {
    let s = load(scenario)?;
    let params = s.config.pipeline_params(mode);
    run_pipeline(&s.model, &s.scene, &s.q_start, &s.q_goal, &params)
}

/// Serialize the planner log: virtual time, configuration, virtual velocity
/// and applied generalized force per step. Header
/// `t,q1..qn,qd1..qdn,f1..fn`.
fn waypoints_csv(w: &Waypoints) -> String {
    let n = w.path.first().map_or(0, |q| q.len());
    let mut out = String::from("t");
    for prefix in ["q", "qd", "f"] {
        for j in 1..=n {
            let _ = write!(out, ",{prefix}{j}");
        }
    }
    out.push('\n');
    for i in 0..w.path.len() {
        let _ = write!(out, "{}", w.times[i]);
        for v in [&w.path[i], &w.velocities[i], &w.forces[i]] {
            for x in v.iter() {
                let _ = write!(out, ",{x}");
            }
        }
        out.push('\n');
    }
    out
}

/// Serialize the reference trajectory sampled at `rate` Hz from t = 0 to the
/// trajectory end, final instant included exactly. Header
/// `t,q_d1..q_dn,qdot_d1..qdot_dn,qddot_d1..qddot_dn`.
fn trajectory_csv(traj: &Trajectory, rate: f64) -> String {
    let n = traj.n_joints();
    let mut out = String::from("t");
    for prefix in ["q_d", "qdot_d", "qddot_d"] {
        for j in 1..=n {
            let _ = write!(out, ",{prefix}{j}");
        }
    }
    out.push('\n');
    let duration = traj.duration();
    let mut row = |t: f64| {
        let (q, qd, qdd) = traj.evaluate(t);
        let _ = write!(out, "{t}");
        for v in [&q, &qd, &qdd] {
            for x in v.iter() {
                let _ = write!(out, ",{x}");
            }
        }
        out.push('\n');
    };
    let mut k = 0u64;
    loop {
        let t = k as f64 / rate;
        if t >= duration {
            break;
        }
        row(t);
        k += 1;
    }
    row(duration);
    out
}

/// Write the four per-run artifacts into `out_dir` (created if missing):
/// `waypoints.csv`, `trajectory.csv` (sampled at `control_rate` Hz),
/// `simlog.csv` and `metrics.txt`.
pub fn write_run_artifacts(
    result: &PipelineResult,
    control_rate: f64,
    out_dir: &Path,
) -> eapf_core::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("waypoints.csv"),
        waypoints_csv(&result.waypoints),
    )?;
    fs::write(
        out_dir.join("trajectory.csv"),
        trajectory_csv(&result.trajectory, control_rate),
    )?;
    fs::write(out_dir.join("simlog.csv"), result.log.to_csv())?;
    fs::write(out_dir.join("metrics.txt"), result.metrics.to_text())?;
    Ok(())
}

/// Print why a completed run earned a nonzero exit code.
fn report_outcome(mode: PlanMode, result: &PipelineResult) {
    match run_exit_code(result) {
        EXIT_COLLISION => eprintln!(
            "{}: collision — minimum obstacle clearance {} m (see simlog.csv)",
            mode.as_str(),
            result.metrics.min_clearance
        ),
        EXIT_PLANNER if !result.waypoints.converged => eprintln!(
            "{}: planner did not converge within its virtual-time budget \
             (final goal distance recorded in metrics.txt)",
            mode.as_str()
        ),
        EXIT_PLANNER => eprintln!(
            "{}: arm did not settle at the goal (final error {} rad)",
            mode.as_str(),
            result.metrics.final_error
        ),
        _ => {}
    }
}

/// Run one mode end to end and write its artifacts. Returns the process
/// exit code; diagnostics go to stderr.
pub fn cmd_run(scenario: &Path, mode: PlanMode, out_dir: &Path) -> i32 {
    let s = match load(scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    let params = s.config.pipeline_params(mode);
    let result = match run_pipeline(&s.model, &s.scene, &s.q_start, &s.q_goal, &params) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    if let Err(e) = write_run_artifacts(&result, 1.0 / params.sim.dt, out_dir) {
        eprintln!("error: {e}");
        return error_exit_code(&e);
    }
    report_outcome(mode, &result);
    run_exit_code(&result)
}

/// One `comparison.csv` row. Metrics are NaN when the mode failed outright
/// (no simulation log exists); `min_clearance` is `inf` for empty scenes.
struct ModeRow {
    mode: PlanMode,
    converged: bool,
    collision_free: bool,
    arrival_time: f64,
    min_clearance: f64,
    jerk_integral: f64,
    max_vel: f64,
    max_acc: f64,
}

impl ModeRow {
    fn from_result(mode: PlanMode, result: &PipelineResult) -> Self {
        ModeRow {
            mode,
            converged: result.waypoints.converged,
            collision_free: result.metrics.collision_free,
            arrival_time: result.metrics.arrival_time.unwrap_or(f64::NAN),
            min_clearance: result.metrics.min_clearance,
            jerk_integral: result.metrics.jerk_integral,
            max_vel: result.metrics.max_vel,
            max_acc: result.metrics.max_acc,
        }
    }

    fn failed(mode: PlanMode) -> Self {
        ModeRow {
            mode,
            converged: false,
            collision_free: false,
            arrival_time: f64::NAN,
            min_clearance: f64::NAN,
            jerk_integral: f64::NAN,
            max_vel: f64::NAN,
            max_acc: f64::NAN,
        }
    }
}

/// Column layout of `comparison.csv`.
pub const COMPARISON_HEADER: &str =
    "mode,converged,collision_free,arrival_time,min_clearance,jerk_integral,max_vel,max_acc";

fn comparison_csv(rows: &[ModeRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.mode.as_str(),
            r.converged,
            r.collision_free,
            r.arrival_time,
            r.min_clearance,
            r.jerk_integral,
            r.max_vel,
            r.max_acc
        );
    }
    out
}

/// Run both modes on one scenario, writing per-mode artifacts into
/// `out_dir/apf` and `out_dir/eapf` plus a side-by-side `comparison.csv` at
/// the top level. The exit code is the worst (highest) of the two runs; a
/// mode that fails outright is reported in its row with NaN metrics.
pub fn cmd_compare(scenario: &Path, out_dir: &Path) -> i32 {
    let s = match load(scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    let mut worst = EXIT_OK;
    let mut rows = Vec::with_capacity(2);
    for mode in [PlanMode::Apf, PlanMode::Eapf] {
        let params = s.config.pipeline_params(mode);
        let code = match run_pipeline(&s.model, &s.scene, &s.q_start, &s.q_goal, &params) {
            Ok(result) => {
                let sub_dir = out_dir.join(mode.as_str());
                if let Err(e) = write_run_artifacts(&result, 1.0 / params.sim.dt, &sub_dir) {
                    eprintln!("error: {e}");
                    return error_exit_code(&e);
                }
                report_outcome(mode, &result);
                rows.push(ModeRow::from_result(mode, &result));
                run_exit_code(&result)
            }
            Err(e) => {
                eprintln!("{}: {e}", mode.as_str());
                rows.push(ModeRow::failed(mode));
                error_exit_code(&e)
            }
        };
        worst = worst.max(code);
    }
    if let Err(e) = write_file(&out_dir.join("comparison.csv"), &comparison_csv(&rows)) {
        eprintln!("error: {e}");
        return error_exit_code(&e);
    }
    worst
}

/// Create the parent directory if needed and write `contents`.
fn write_file(path: &Path, contents: &str) -> eapf_core::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Plan and optimize only (no simulation), then write the reference
/// trajectory sampled at `rate` Hz to `out_dir/trajectory.csv`. Exit 0 when
/// the planner converged, 1 otherwise; the file is written either way so a
/// partial path remains inspectable.
pub fn cmd_export_trajectory(scenario: &Path, mode: PlanMode, out_dir: &Path, rate: f64) -> i32 {
    if !(rate.is_finite() && rate > 0.0) {
        eprintln!("error: config error: --rate must be a positive sample rate in Hz (got {rate})");
        return EXIT_CONFIG;
    }
    let s = match load(scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    let params = s.config.pipeline_params(mode);
    let planned = plan_and_optimize(&s.model, &s.scene, &s.q_start, &s.q_goal, &params);
    let (waypoints, trajectory, _constraints) = match planned {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    if let Err(e) = write_file(
        &out_dir.join("trajectory.csv"),
        &trajectory_csv(&trajectory, rate),
    ) {
        eprintln!("error: {e}");
        return error_exit_code(&e);
    }
    if waypoints.converged {
        EXIT_OK
    } else {
        eprintln!(
            "{}: planner did not converge; exported trajectory tracks the partial path",
            mode.as_str()
        );
        EXIT_PLANNER
    }
}
