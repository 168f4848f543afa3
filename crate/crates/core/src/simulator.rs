//! Closed-loop tracking simulation and evaluation metrics.
//!
//! The simulator integrates the rigid-body dynamics with fixed-step RK4
//! while a computed-torque controller tracks the reference trajectory at the
//! control rate (one torque per step, held over the step — zero-order
//! hold). Every step is logged; metrics (arrival time, obstacle clearance,
//! integrated squared jerk, peak rates) are derived from the log alone, so
//! anything the metrics claim can be recomputed from the emitted CSV.
//!
//! [`run_pipeline`] chains the full experiment: potential-field planning →
//! knot selection and minimum-jerk time optimization → tracking → metrics.

use crate::controller::{computed_torque, Gains};
use crate::dynamics::{forward_dynamics, JointState};
use crate::kinematics::{forward_kinematics, point_jacobian_with_frames, RobotModel};
use crate::potential_field::{
    plan_path, signed_surface_distance, FieldParams, PlanMode, Scene, Waypoints,
};
use crate::trajectory_opt::{
    optimize_trajectory, ConstraintReport, Limits, Trajectory,
};
use crate::{Error, Result};
use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Simulation timing and arrival threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Integration and control step (s).
    #[serde(default = "SimConfig::default_dt")]
    pub dt: f64,
    /// Extra settle time simulated past the trajectory end (s).
    #[serde(default = "SimConfig::default_t_extra")]
    pub t_extra: f64,
    /// Joint-space radius counting as "arrived" (rad).
    #[serde(default = "SimConfig::default_arrival_tol")]
    pub arrival_tol: f64,
}

impl SimConfig {
    fn default_dt() -> f64 {
        1e-3
    }
    fn default_t_extra() -> f64 {
        0.5
    }
    fn default_arrival_tol() -> f64 {
        0.05
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("simulation.dt must be > 0 (got {})", self.dt));
        }
        if !(self.t_extra >= 0.0 && self.t_extra.is_finite()) {
            return Err(format!(
                "simulation.t_extra must be ≥ 0 (got {})",
                self.t_extra
            ));
        }
        if !(self.arrival_tol > 0.0 && self.arrival_tol.is_finite()) {
            return Err(format!(
                "simulation.arrival_tol must be > 0 (got {})",
                self.arrival_tol
            ));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: Self::default_dt(),
            t_extra: Self::default_t_extra(),
            arrival_tol: Self::default_arrival_tol(),
        }
    }
}

/// One RK4 step of the manipulator dynamics under a torque held constant
/// over the step.
pub fn step(model: &RobotModel, state: &JointState, tau: &DVector<f64>, dt: f64) -> JointState {
    let (q, qd) = (&state.q, &state.qd);
    let k1q = qd.clone();
    let k1v = forward_dynamics(model, q, qd, tau);
    let k2q = qd + 0.5 * dt * &k1v;
    let k2v = forward_dynamics(model, &(q + 0.5 * dt * &k1q), &k2q, tau);
    let k3q = qd + 0.5 * dt * &k2v;
    let k3v = forward_dynamics(model, &(q + 0.5 * dt * &k2q), &k3q, tau);
    let k4q = qd + dt * &k3v;
    let k4v = forward_dynamics(model, &(q + dt * &k3q), &k4q, tau);
    JointState {
        q: q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        qd: qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

/// One logged simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub t: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    /// Torque commanded at `t` (held until the next step).
    pub tau: DVector<f64>,
    /// End-effector position (m).
    pub ee: Vector3<f64>,
    /// Joint-space distance to the goal ‖q − q_goal‖ (rad).
    pub dist_goal: f64,
    /// Joint-space speed ‖q̇‖ (rad/s).
    pub vel_goal: f64,
    /// Minimum signed clearance over all control points and obstacles (m);
    /// negative means penetration, +∞ when the scene is empty.
    pub dist_obs: f64,
    /// Cartesian speed of the control point realizing `dist_obs` (m/s);
    /// zero when the scene is empty.
    pub vel_obs: f64,
}

/// Complete simulation log at the control rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<SimRow>,
}

impl SimLog {
    pub fn n_joints(&self) -> usize {
        self.rows.first().map_or(0, |r| r.q.len())
    }

    /// CSV header: `t,q1..qn,qd1..qdn,tau1..taun,ee_x,ee_y,ee_z,dist_goal,
    /// vel_goal,dist_obs,vel_obs`.
    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("t");
        for prefix in ["q", "qd", "tau"] {
            for j in 1..=n {
                let _ = write!(h, ",{prefix}{j}");
            }
        }
        h.push_str(",ee_x,ee_y,ee_z,dist_goal,vel_goal,dist_obs,vel_obs");
        h
    }

    /// Serialize the whole log as CSV (with header). Floats use shortest
    /// round-trip formatting, so equal logs serialize byte-identically.
    pub fn to_csv(&self) -> String {
        let n = self.n_joints();
        let mut out = Self::csv_header(n);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            for v in [&r.q, &r.qd, &r.tau] {
                for x in v.iter() {
                    let _ = write!(out, ",{x}");
                }
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{},{}",
                r.ee.x, r.ee.y, r.ee.z, r.dist_goal, r.vel_goal, r.dist_obs, r.vel_obs
            );
        }
        out
    }
}

/// Log-derived evaluation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// First time after which ‖q − q_goal‖ stays within the arrival
    /// tolerance for the rest of the log; `None` if the arm never settles.
    pub arrival_time: Option<f64>,
    /// Minimum signed obstacle clearance over the run (m); +∞ for empty
    /// scenes.
    pub min_clearance: f64,
    /// True when no control point ever penetrates an obstacle.
    pub collision_free: bool,
    /// ∫‖q⃛‖²dt estimated from the logged velocities by central differences
    /// and the trapezoid rule.
    pub jerk_integral: f64,
    /// Peak |q̇| over joints and time (rad/s).
    pub max_vel: f64,
    /// Peak |q̈| over joints and time, from differenced velocities (rad/s²).
    pub max_acc: f64,
    /// ‖q − q_goal‖ at the final logged step (rad).
    pub final_error: f64,
}

impl Metrics {
    /// Plain `key = value` lines; `arrival_time = none` when unset.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.arrival_time {
            Some(t) => {
                let _ = writeln!(s, "arrival_time = {t}");
            }
            None => {
                let _ = writeln!(s, "arrival_time = none");
            }
        }
        let _ = writeln!(s, "min_clearance = {}", self.min_clearance);
        let _ = writeln!(s, "collision_free = {}", self.collision_free);
        let _ = writeln!(s, "jerk_integral = {}", self.jerk_integral);
        let _ = writeln!(s, "max_vel = {}", self.max_vel);
        let _ = writeln!(s, "max_acc = {}", self.max_acc);
        let _ = writeln!(s, "final_error = {}", self.final_error);
        s
    }
}

/// Compute [`Metrics`] from a log. Arrival requires the distance to stay
/// within `arrival_tol` from some row to the end of the log (a transient
/// dip does not count).
pub fn compute_metrics(log: &SimLog, arrival_tol: f64) -> Metrics {
    let rows = &log.rows;
    let arrival_time = if rows.is_empty() {
        None
    } else {
        match rows.iter().rposition(|r| r.dist_goal > arrival_tol) {
            None => Some(rows[0].t),
            Some(last_out) => rows.get(last_out + 1).map(|r| r.t),
        }
    };

    let min_clearance = rows
        .iter()
        .map(|r| r.dist_obs)
        .fold(f64::INFINITY, f64::min);
    let max_vel = rows
        .iter()
        .map(|r| r.qd.amax())
        .fold(0.0, f64::max);

    // q̈ and q⃛ by repeated second-order differences of the logged q̇
    // (central inside, one-sided at the log boundaries so nothing is
    // truncated), then ∫‖q⃛‖² by the trapezoid rule over the full log.
    let mut max_acc = 0.0f64;
    let mut jerk_integral = 0.0;
    if rows.len() >= 5 {
        let dt = rows[1].t - rows[0].t;
        let diff = |f: &dyn Fn(usize) -> DVector<f64>, len: usize| -> Vec<DVector<f64>> {
            (0..len)
                .map(|i| {
                    if i == 0 {
                        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dt)
                    } else if i == len - 1 {
                        (3.0 * f(len - 1) - 4.0 * f(len - 2) + f(len - 3)) / (2.0 * dt)
                    } else {
                        (f(i + 1) - f(i - 1)) / (2.0 * dt)
                    }
                })
                .collect()
        };
        let acc = diff(&|i| rows[i].qd.clone(), rows.len());
        for a in &acc {
            max_acc = max_acc.max(a.amax());
        }
        let jerk = diff(&|i| acc[i].clone(), acc.len());
        for w in jerk.windows(2) {
            jerk_integral += 0.5 * (w[0].norm_squared() + w[1].norm_squared()) * dt;
        }
    }

    Metrics {
        arrival_time,
        min_clearance,
        collision_free: min_clearance > 0.0,
        jerk_integral,
        max_vel,
        max_acc,
        final_error: rows.last().map_or(f64::INFINITY, |r| r.dist_goal),
    }
}

/// Minimum signed clearance over the n+1 control points and its realizing
/// point's speed.
fn clearance(
    model: &RobotModel,
    scene: &Scene,
    frames: &[crate::kinematics::Transform],
    qd: &DVector<f64>,
) -> (f64, f64) {
    if scene.obstacles.is_empty() {
        return (f64::INFINITY, 0.0);
    }
    let n = model.n();
    let mut best = f64::INFINITY;
    let mut best_point = 0usize;
    for j in 0..=n {
        let p = frames[j].translation;
        for obstacle in &scene.obstacles {
            let (d, _) = signed_surface_distance(obstacle, &p);
            if d < best {
                best = d;
                best_point = j;
            }
        }
    }
    let jv = point_jacobian_with_frames(model, frames, best_point + 1, &Vector3::zeros()).jv;
    (best, (jv * qd).norm())
}

/// Simulate computed-torque tracking of `traj` from rest at its start
/// configuration, logging every control step from t = 0 through the
/// trajectory end plus the settle window.
pub fn track_trajectory(
    model: &RobotModel,
    scene: &Scene,
    traj: &Trajectory,
    gains: &Gains,
    q_goal: &DVector<f64>,
    sim: &SimConfig,
) -> Result<SimLog> {
    let dt = sim.dt;
    let horizon = traj.duration() + sim.t_extra;
    let steps = (horizon / dt).ceil() as usize;
    let mut state = JointState::new(traj.evaluate(0.0).0, DVector::zeros(model.n()));
    let mut log = SimLog {
        rows: Vec::with_capacity(steps + 1),
    };

    for k in 0..=steps {
        let t = k as f64 * dt;
        let (q_d, qd_d, qdd_d) = traj.evaluate(t);
        let tau = computed_torque(model, &state, &q_d, &qd_d, &qdd_d, gains);
        let frames = forward_kinematics(model, &state.q);
        let (dist_obs, vel_obs) = clearance(model, scene, &frames, &state.qd);
        log.rows.push(SimRow {
            t,
            q: state.q.clone(),
            qd: state.qd.clone(),
            tau: tau.clone(),
            ee: frames[model.n()].translation,
            dist_goal: (&state.q - q_goal).norm(),
            vel_goal: state.qd.norm(),
            dist_obs,
            vel_obs,
        });
        if k < steps {
            state = step(model, &state, &tau, dt);
            if !state.q.iter().all(|x| x.is_finite())
                || !state.qd.iter().all(|x| x.is_finite())
            {
                return Err(Error::SimDiverged { t: t + dt });
            }
        }
    }
    Ok(log)
}

/// Everything needed to run the full experiment for one planning mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub field: FieldParams,
    pub mode: PlanMode,
    pub limits: Limits,
    /// Time-penalty weight λ in `jerk cost + λ·T`.
    pub lambda: f64,
    /// Number of trajectory knots the planner path is downsampled to.
    pub knot_count: usize,
    /// Upper bound for the trajectory duration search (s).
    pub t_max: f64,
    pub gains: Gains,
    pub sim: SimConfig,
}

/// Output of [`run_pipeline`]: every intermediate artifact plus the final
/// metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub waypoints: Waypoints,
    pub trajectory: Trajectory,
    pub constraints: ConstraintReport,
    pub log: SimLog,
    pub metrics: Metrics,
}

/// Plan and time-optimize without simulating.
///
/// A planner that stops inside its goal tolerance leaves a residual offset;
/// the exact goal is appended to the path so the fitted trajectory ends at
/// `q_goal` itself. A planner time-out is not an error: the partial path is
/// still optimized so the failure is measurable (`waypoints.converged`
/// records it).
pub fn plan_and_optimize(
    model: &RobotModel,
    scene: &Scene,
    q_start: &DVector<f64>,
    q_goal: &DVector<f64>,
    params: &PipelineParams,
) -> Result<(Waypoints, Trajectory, ConstraintReport)> {
    let waypoints = plan_path(model, scene, q_start, q_goal, &params.field, params.mode)?;
    let mut path = waypoints.path.clone();
    if waypoints.converged && path.last() != Some(q_goal) {
        path.push(q_goal.clone());
    }
    let (trajectory, constraints) = optimize_trajectory(
        &path,
        params.knot_count,
        &params.limits,
        params.lambda,
        params.t_max,
    )?;
    Ok((waypoints, trajectory, constraints))
}

/// Plan → optimize → track → measure.
pub fn run_pipeline(
    model: &RobotModel,
    scene: &Scene,
    q_start: &DVector<f64>,
    q_goal: &DVector<f64>,
    params: &PipelineParams,
) -> Result<PipelineResult> {
    let (waypoints, trajectory, constraints) =
        plan_and_optimize(model, scene, q_start, q_goal, params)?;
    let log = track_trajectory(model, scene, &trajectory, &params.gains, q_goal, &params.sim)?;
    let metrics = compute_metrics(&log, params.sim.arrival_tol);
    Ok(PipelineResult {
        waypoints,
        trajectory,
        constraints,
        log,
        metrics,
    })
}
