//! Planning, trajectory optimization and simulation for serial manipulators.
//!
//! The crate covers the full pipeline from a joint-space goal to an executed,
//! torque-controlled motion:
//!
//! 1. [`kinematics`] — modified Denavit-Hartenberg chains, forward kinematics
//!    and point Jacobians for an n-DOF revolute arm described by a data file.
//! 2. [`dynamics`] — Euler-Lagrange rigid-body dynamics: mass matrix, Coriolis
//!    matrix (Christoffel symbols), gravity vector and forward dynamics.
//! 3. [`potential_field`] — classical artificial-potential-field (APF) forces
//!    and the energy-based variant (E-APF) that adds kinetic potentials on the
//!    relative velocities, plus a virtual-dynamics path planner.
//! 4. [`trajectory_opt`] — piecewise-quintic minimum-jerk interpolation of the
//!    planned waypoints with a time-penalized duration search under velocity
//!    and acceleration limits.
//! 5. [`controller`] — computed-torque tracking control.
//! 6. [`simulator`] — fixed-step RK4 closed-loop simulation, logging and
//!    metrics (arrival time, obstacle clearance, executed jerk).
//! 7. [`scenario`] — versioned TOML schemas for robot parameter files and
//!    scenario configurations, with strict validation.
//!
//! All joint vectors are `DVector<f64>` of length n (the number of links);
//! angles are radians, lengths metres, masses kilograms.

pub mod controller;
pub mod dynamics;
pub mod kinematics;
pub mod potential_field;
pub mod scenario;
pub mod simulator;
pub mod trajectory_opt;

pub use controller::{computed_torque, Gains};
pub use dynamics::{
    forward_dynamics, gravity_vector, mass_matrix, coriolis_matrix, potential_energy,
    total_energy, DynamicsTerms, JointState,
};
pub use kinematics::{
    dh_transform, forward_kinematics, point_jacobian, Jacobian, LinkParams, RobotModel,
    Transform,
};
pub use potential_field::{
    apf_force, eapf_attractive, eapf_force, eapf_repulsive, mu_o_schedule, plan_path,
    influence_distance, repulsive_kinetic_term, repulsive_position_term, sample_field,
    signed_surface_distance, surface_distance, ControlPointTerm, FieldHistory, FieldParams,
    FieldSample, Obstacle,
    PlanMode, Scene, Waypoints, KINETIC_TERM_CLAMP,
};
pub use scenario::{load_robot, parse_robot, parse_scenario, ScenarioConfig};
pub use simulator::{
    compute_metrics, plan_and_optimize, run_pipeline, step, track_trajectory, Metrics,
    PipelineParams, PipelineResult, SimConfig, SimLog, SimRow,
};
pub use trajectory_opt::{
    constraint_report, fit_min_jerk, jerk_cost, optimize_knots, optimize_trajectory,
    select_knots, ConstraintReport, Limits, Trajectory,
};

/// Errors produced by parsing, planning, optimization and simulation.
///
/// Dimension mismatches and violated model invariants (e.g. a non-SPD mass
/// matrix) are programmer/data errors and panic instead; everything that can
/// legitimately fail at run time on valid inputs is reported here.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Configuration or robot file rejected (parse error, unknown key,
    /// missing field, violated invariant). The message names the offending
    /// key or file location.
    #[error("config error: {0}")]
    Config(String),

    /// File I/O failure while reading configs or writing outputs.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// The planner produced a non-finite force or state, which signals
    /// parameter misconfiguration (e.g. a zero regularization floor).
    #[error("planner diverged: non-finite {what} at t = {t:.4} s")]
    PlannerDiverged { what: &'static str, t: f64 },

    /// Fewer than two knots requested from the waypoint downsampler.
    #[error("knot count must be at least 2 (got {0})")]
    InvalidKnotCount(usize),

    /// Two knots were assigned the same time stamp, so the quintic fit is
    /// singular. Indicates duplicate interior waypoints.
    #[error("duplicate knot times at segment {0}")]
    DuplicateKnotTimes(usize),

    /// No trajectory duration within the search window satisfies the
    /// velocity/acceleration limits; the waypoint set is degenerate.
    #[error("no feasible duration in [{lo:.3}, {hi:.3}] s under the given limits")]
    NoFeasibleDuration { lo: f64, hi: f64 },

    /// The closed-loop simulation produced a non-finite state.
    #[error("simulation produced a non-finite state at t = {t:.4} s")]
    SimDiverged { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
