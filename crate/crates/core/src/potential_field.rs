//! Artificial potential fields for joint-space path planning.
//!
//! Two force laws share the same geometric machinery:
//!
//! * **APF** (classical): joint-space attraction `−k_a·r_e` toward the goal
//!   configuration plus, per control point within the influence radius ρ₀ of
//!   its nearest obstacle, a Cartesian repulsion of magnitude
//!   `k_r·(1/r_o − 1/ρ₀)·(1/r_o²)` along the outward surface direction,
//!   mapped into joint space through the point's Jacobian transpose.
//! * **E-APF** (energy-based): augments both terms with kinetic potentials on
//!   the relative velocities. The attractive part gains `γ·k_a·v̇_e`; the
//!   repulsive part gains `γ·k_r·(3/v_o − 2/μ_o)·v̇_o/v_o³`, active only while
//!   the control point is inside the influence radius, slower than the speed
//!   bound μ_o, and actually approaching the obstacle. The kinetic terms keep
//!   the virtual system moving where the classical position terms balance,
//!   which is what lets E-APF leave local minima.
//!
//! Control points are the origins of link frames 1..n plus the end-effector
//! (n + 1 points). The planner integrates virtual second-order joint-space
//! dynamics driven by the selected force law and records every step.

use crate::kinematics::{forward_kinematics, point_jacobian_with_frames, RobotModel};
use crate::{Error, Result};
use nalgebra::{DVector, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

/// Magnitude bound on the kinetic repulsion term. The raw law grows like
/// 1/v_o⁴ as the relative speed approaches the eps_v floor, so an unbounded
/// term would inject arbitrarily large impulses into the virtual dynamics at
/// dt_plan and fling the state away from the workspace. The bound is sized
/// to the position term at moderate proximity (625 at r_o = rho0/2 with
/// nominal gains): large enough for momentum kicks through force-balance
/// points, small enough that one planner step changes the virtual velocity
/// by at most ~0.1 rad/s.
pub const KINETIC_TERM_CLAMP: f64 = 1.0e2;

/// Static scene obstacle.
#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    Sphere {
        center: Vector3<f64>,
        /// Radius (m), > 0.
        radius: f64,
    },
    /// Finite cylinder with flat caps, extending `height` along `axis` from
    /// `base_center`.
    Cylinder {
        base_center: Vector3<f64>,
        /// Unit vector, ‖axis‖ = 1 ± 1e-9.
        axis: Vector3<f64>,
        /// Height (m), > 0.
        height: f64,
        /// Radius (m), > 0.
        radius: f64,
    },
}

impl Obstacle {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            Obstacle::Sphere { center, radius } => {
                if !center.iter().all(|c| c.is_finite()) {
                    return Err("sphere center must be finite".into());
                }
                if !(*radius > 0.0) {
                    return Err(format!("sphere radius must be > 0 (got {radius})"));
                }
            }
            Obstacle::Cylinder {
                base_center,
                axis,
                height,
                radius,
            } => {
                if !base_center.iter().all(|c| c.is_finite()) {
                    return Err("cylinder center must be finite".into());
                }
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(format!(
                        "cylinder axis must be a unit vector (‖axis‖ = {})",
                        axis.norm()
                    ));
                }
                if !(*height > 0.0) {
                    return Err(format!("cylinder height must be > 0 (got {height})"));
                }
                if !(*radius > 0.0) {
                    return Err(format!("cylinder radius must be > 0 (got {radius})"));
                }
            }
        }
        Ok(())
    }
}

/// All obstacles of a planning scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
}

impl Scene {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate().map_err(|e| format!("obstacles[{i}]: {e}"))?;
        }
        Ok(())
    }
}

/// Potential-field gains and planner integration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    /// Attractive gain k_a.
    pub k_a: f64,
    /// Repulsive gain k_r.
    pub k_r: f64,
    /// Obstacle influence radius ρ₀ (m).
    pub rho0: f64,
    /// Kinetic-potential weight γ ∈ (0, 1).
    pub gamma: f64,
    /// Base relative-speed bound μ (m/s) for the kinetic repulsion gate.
    pub mu_base: f64,
    /// Relative-speed regularization floor (m/s).
    #[serde(default = "FieldParams::default_eps_v")]
    pub eps_v: f64,
    /// Influence-distance regularization floor (m).
    #[serde(default = "FieldParams::default_eps_r")]
    pub eps_r: f64,
    /// Virtual viscous damping on q̇_v (1/s).
    pub damping: f64,
    /// Planner integration step (s).
    pub dt_plan: f64,
    /// Virtual-time budget before the planner gives up (s).
    pub t_max_plan: f64,
    /// Joint-space goal tolerance ‖q − q_goal‖ (rad).
    pub goal_tol: f64,
}

impl FieldParams {
    fn default_eps_v() -> f64 {
        1e-3
    }
    fn default_eps_r() -> f64 {
        1e-3
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("k_a", self.k_a),
            ("k_r", self.k_r),
            ("rho0", self.rho0),
            ("mu_base", self.mu_base),
            ("eps_v", self.eps_v),
            ("eps_r", self.eps_r),
            ("dt_plan", self.dt_plan),
            ("t_max_plan", self.t_max_plan),
            ("goal_tol", self.goal_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("field.{name} must be > 0 (got {v})"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!(
                "field.gamma must satisfy γ ∈ (0, 1) (got {})",
                self.gamma
            ));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(format!("field.damping must be ≥ 0 (got {})", self.damping));
        }
        Ok(())
    }
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            k_a: 5.0,
            k_r: 10.0,
            rho0: 0.4,
            gamma: 0.8,
            mu_base: 1.0,
            eps_v: Self::default_eps_v(),
            eps_r: Self::default_eps_r(),
            damping: 0.5,
            dt_plan: 1e-3,
            t_max_plan: 10.0,
            goal_tol: 0.05,
        }
    }
}

/// Field quantities for one control point against its nearest obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointTerm {
    /// Linear Jacobian of the control point (3×n).
    pub jv: Matrix3xX<f64>,
    /// Influence distance to the nearest obstacle (point-source distance to
    /// its geometric centre), clamped ≥ eps_r (m).
    pub r_o: f64,
    /// Unit direction from the obstacle's influence centre toward the point.
    pub dir_o: Vector3<f64>,
    /// Relative speed w.r.t. the obstacle, clamped ≥ eps_v (m/s). Static
    /// obstacles make this the control point's own speed.
    pub v_o: f64,
    /// Estimated d(v_o)/dt (m/s²), zero when no history exists.
    pub a_o: f64,
    /// Whether the point is closing in on the obstacle (d r_o/dt < 0).
    pub approaching: bool,
    /// Relative-speed bound μ_o for the kinetic gate (m/s).
    pub mu_o: f64,
}

/// One field evaluation: goal-relative joint-space quantities plus the
/// per-control-point obstacle terms (empty for an empty scene).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    /// Joint-space goal error r_e = q − q_goal (rad).
    pub r_e: DVector<f64>,
    /// Relative velocity w.r.t. the (static) goal = q̇ (rad/s).
    pub v_e: DVector<f64>,
    /// Estimated relative acceleration v̇_e (rad/s²), zero without history.
    pub a_e: DVector<f64>,
    pub points: Vec<ControlPointTerm>,
}

/// Previous-step velocities used for the backward-difference estimates of
/// v̇_e and v̇_o.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub v_e: DVector<f64>,
    /// One entry per control point, in control-point order.
    pub v_o: Vec<f64>,
}

/// Which force law drives the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    Apf,
    Eapf,
}

impl PlanMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanMode::Apf => "apf",
            PlanMode::Eapf => "eapf",
        }
    }
}

/// Planner output: the visited configurations with timestamps, convergence
/// flag, and the per-step velocities and applied forces for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoints {
    pub path: Vec<DVector<f64>>,
    /// Strictly increasing virtual timestamps (s), one per path entry.
    pub times: Vec<f64>,
    /// True if the planner stopped inside goal_tol, false on time-out.
    pub converged: bool,
    pub velocities: Vec<DVector<f64>>,
    pub forces: Vec<DVector<f64>>,
}

/// Signed surface distance (negative inside) and the outward unit direction.
///
/// Outside the obstacle the direction points from the closest surface point
/// toward `p`; inside it points from the centre (sphere) or axis (cylinder)
/// toward `p`. When `p` lies exactly on the centre/axis the direction is +x̂
/// as a deterministic tie-break.
pub fn signed_surface_distance(obstacle: &Obstacle, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let x_hat = Vector3::x();
    match obstacle {
        Obstacle::Sphere { center, radius } => {
            let delta = p - center;
            let rho = delta.norm();
            if rho <= f64::EPSILON {
                (-radius, x_hat)
            } else {
                (rho - radius, delta / rho)
            }
        }
        Obstacle::Cylinder {
            base_center,
            axis,
            height,
            radius,
        } => {
            let rel = p - base_center;
            let s = rel.dot(axis);
            let radial = rel - s * axis;
            let rho = radial.norm();
            let radial_dir = if rho > f64::EPSILON { radial / rho } else { x_hat };

            let inside_axially = (0.0..=*height).contains(&s);
            if inside_axially && rho < *radius {
                // Inside: depth to the nearest of wall and both caps,
                // direction radially outward from the axis.
                let depth = (radius - rho).min(s).min(height - s);
                (-depth, radial_dir)
            } else if inside_axially {
                // Closest point on the lateral wall.
                (rho - radius, radial_dir)
            } else {
                let dz = if s > *height { s - height } else { -s };
                if rho <= *radius {
                    // Beyond a cap, within the radius: closest point on the cap.
                    let dir = if s > *height { *axis } else { -*axis };
                    (dz, dir)
                } else {
                    // Beyond a cap and outside the radius: closest to the rim.
                    let closest =
                        base_center + s.clamp(0.0, *height) * axis + *radius * radial_dir;
                    let delta = p - closest;
                    let dist = delta.norm();
                    (dist, delta / dist)
                }
            }
        }
    }
}

/// Surface distance for clearance accounting: like
/// [`signed_surface_distance`] but clamped to ≥ `eps_r` so 1/distance terms
/// stay finite.
pub fn surface_distance(
    obstacle: &Obstacle,
    p: &Vector3<f64>,
    eps_r: f64,
) -> (f64, Vector3<f64>) {
    let (d, dir) = signed_surface_distance(obstacle, p);
    (d.max(eps_r), dir)
}

/// Distance from `p` to the obstacle's influence centre, clamped to
/// ≥ `eps_r`, and the unit direction from the centre toward `p` (+x̂ when `p`
/// is exactly at the centre, as a deterministic tie-break).
///
/// The repulsive field treats each obstacle as a point source located at its
/// geometric centre — the sphere centre, or the cylinder's axis midpoint —
/// while collision checks and clearance metrics always use the true surface
/// ([`signed_surface_distance`]). A surface-anchored field with the nominal
/// influence radius would leave goal configurations that tuck close under an
/// obstacle permanently repelled, displacing the planner equilibrium far
/// from the goal; the point-source field keeps the strength law intact and
/// vanishes smoothly at the influence boundary.
pub fn influence_distance(
    obstacle: &Obstacle,
    p: &Vector3<f64>,
    eps_r: f64,
) -> (f64, Vector3<f64>) {
    let center = match obstacle {
        Obstacle::Sphere { center, .. } => *center,
        Obstacle::Cylinder {
            base_center,
            axis,
            height,
            ..
        } => base_center + 0.5 * *height * axis,
    };
    let delta = p - center;
    let rho = delta.norm();
    if rho <= f64::EPSILON {
        (eps_r, Vector3::x())
    } else {
        (rho.max(eps_r), delta / rho)
    }
}

/// Classical repulsion magnitude `k_r·(1/r_o − 1/ρ₀)·(1/r_o²)` for
/// `r_o < ρ₀`, zero beyond the influence radius. This is `−∂U_r/∂r_o` of the
/// potential `U_r = ½k_r(1/r_o − 1/ρ₀)²`.
pub fn repulsive_position_term(r_o: f64, params: &FieldParams) -> f64 {
    if r_o >= params.rho0 {
        return 0.0;
    }
    let inv = 1.0 / r_o;
    params.k_r * (inv - 1.0 / params.rho0) * inv * inv
}

/// Kinetic repulsion magnitude `γ·k_r·(3/v_o − 2/μ_o)·v̇_o/v_o³` (raw law,
/// no gating or clamping — callers apply both).
pub fn repulsive_kinetic_term(v_o: f64, a_o: f64, mu_o: f64, params: &FieldParams) -> f64 {
    params.gamma * params.k_r * (3.0 / v_o - 2.0 / mu_o) * a_o / (v_o * v_o * v_o)
}

/// Relative-speed bound schedule `μ_o = μ_base·clamp(r_o/ρ₀, 0.1, 1.0)`:
/// tighter near the surface, saturating at μ_base outside the influence
/// radius.
pub fn mu_o_schedule(r_o: f64, params: &FieldParams) -> f64 {
    params.mu_base * (r_o / params.rho0).clamp(0.1, 1.0)
}

/// Classical APF generalized force: `−k_a·r_e` plus every control point's
/// repulsion mapped through its Jacobian transpose.
pub fn apf_force(
    r_e: &DVector<f64>,
    points: &[ControlPointTerm],
    params: &FieldParams,
) -> DVector<f64> {
    let mut f = -params.k_a * r_e;
    for term in points {
        let mag = repulsive_position_term(term.r_o, params);
        if mag != 0.0 {
            f.gemv_tr(mag, &term.jv, &term.dir_o, 1.0);
        }
    }
    f
}

/// E-APF attractive force `γ·k_a·v̇_e − k_a·r_e` (joint space).
pub fn eapf_attractive(
    r_e: &DVector<f64>,
    a_e: &DVector<f64>,
    params: &FieldParams,
) -> DVector<f64> {
    params.gamma * params.k_a * a_e - params.k_a * r_e
}

/// E-APF Cartesian repulsion for one control point: the position term plus,
/// when the point is inside the influence radius, slower than μ_o and
/// approaching, the kinetic term (clamped to ±[`KINETIC_TERM_CLAMP`]). The
/// total scalar magnitude acts along `dir_o`.
pub fn eapf_repulsive(term: &ControlPointTerm, params: &FieldParams) -> Vector3<f64> {
    if term.r_o >= params.rho0 {
        return Vector3::zeros();
    }
    let mut mag = repulsive_position_term(term.r_o, params);
    if term.approaching && term.v_o < term.mu_o {
        mag += repulsive_kinetic_term(term.v_o, term.a_o, term.mu_o, params)
            .clamp(-KINETIC_TERM_CLAMP, KINETIC_TERM_CLAMP);
    }
    mag * term.dir_o
}

/// Total E-APF generalized force for a field sample.
pub fn eapf_force(sample: &FieldSample, params: &FieldParams) -> DVector<f64> {
    let mut f = eapf_attractive(&sample.r_e, &sample.a_e, params);
    for term in &sample.points {
        let fr = eapf_repulsive(term, params);
        if fr != Vector3::zeros() {
            f.gemv_tr(1.0, &term.jv, &fr, 1.0);
        }
    }
    f
}

/// Evaluate every field quantity at `(q, q̇)`: goal-relative terms plus, for
/// each of the n+1 control points, nearest-obstacle distance/direction and
/// relative-speed terms. `history` supplies the previous step's velocities
/// for the backward-difference v̇ estimates (first step: zero).
///
/// Nearest obstacles are chosen by clamped [`influence_distance`] with ties
/// broken toward the lowest obstacle index, so sampling is deterministic.
pub fn sample_field(
    model: &RobotModel,
    scene: &Scene,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    q_goal: &DVector<f64>,
    history: Option<&FieldHistory>,
    dt: f64,
    params: &FieldParams,
) -> FieldSample {
    let n = model.n();
    assert_eq!(q_goal.len(), n, "q_goal length does not match model");
    let r_e = q - q_goal;
    let v_e = qdot.clone();
    let a_e = match history {
        Some(h) => (&v_e - &h.v_e) / dt,
        None => DVector::zeros(n),
    };

    let mut points = Vec::new();
    if !scene.obstacles.is_empty() {
        let frames = forward_kinematics(model, q);
        for j in 0..=n {
            let position = frames[j].translation;
            let jv = point_jacobian_with_frames(model, &frames, j + 1, &Vector3::zeros()).jv;
            let pdot = &jv * qdot;
            let v_o = pdot.norm().max(params.eps_v);
            let a_o = match history {
                Some(h) => (v_o - h.v_o[j]) / dt,
                None => 0.0,
            };
            let (mut r_o, mut dir_o) =
                influence_distance(&scene.obstacles[0], &position, params.eps_r);
            for obstacle in &scene.obstacles[1..] {
                let (d, dir) = influence_distance(obstacle, &position, params.eps_r);
                if d < r_o {
                    (r_o, dir_o) = (d, dir);
                }
            }
            // d(r_o)/dt = dir_o·ṗ for a static obstacle.
            let approaching = dir_o.dot(&pdot) < 0.0;
            let mu_o = mu_o_schedule(r_o, params);
            points.push(ControlPointTerm {
                jv,
                r_o,
                dir_o,
                v_o,
                a_o,
                approaching,
                mu_o,
            });
        }
    }
    FieldSample {
        r_e,
        v_e,
        a_e,
        points,
    }
}

/// Plan a joint-space path by integrating virtual second-order dynamics
/// `q̈_v = F(mode) − damping·q̇_v` with semi-implicit Euler at `dt_plan`,
/// starting at rest from `q_start`.
///
/// APF mode applies [`apf_force`] on a unit virtual inertia. E-APF mode
/// treats the attractive kinetic term `γ·k_a·v̇_e` implicitly — it is the
/// Euler-Lagrange inertia of the kinetic potential ½γk_a‖v_e‖², so it scales
/// the effective inertia to `1 + γ·k_a` rather than being fed back as a
/// lagged force (explicit feedback of the planner's own acceleration with
/// gain γ·k_a > 1 is divergent for any estimator). The repulsive kinetic
/// term keeps its explicit backward-difference v̇_o estimate.
///
/// Terminates as converged when `‖q − q_goal‖ ≤ goal_tol`, or unconverged
/// when virtual time exceeds `t_max_plan`. Every integration step is
/// recorded. Identical inputs yield bit-identical waypoints.
pub fn plan_path(
    model: &RobotModel,
    scene: &Scene,
    q_start: &DVector<f64>,
    q_goal: &DVector<f64>,
    params: &FieldParams,
    mode: PlanMode,
) -> Result<Waypoints> {
    let n = model.n();
    assert_eq!(q_start.len(), n, "q_start length does not match model");
    assert_eq!(q_goal.len(), n, "q_goal length does not match model");

    let dt = params.dt_plan;
    let eapf_inertia = 1.0 + params.gamma * params.k_a;
    let mut q = q_start.clone();
    let mut v = DVector::zeros(n);
    let mut history: Option<FieldHistory> = None;

    let mut out = Waypoints {
        path: Vec::new(),
        times: Vec::new(),
        converged: false,
        velocities: Vec::new(),
        forces: Vec::new(),
    };

    let mut step = 0u64;
    loop {
        let t = step as f64 * dt;
        let sample = sample_field(model, scene, &q, &v, q_goal, history.as_ref(), dt, params);
        let force = match mode {
            PlanMode::Apf => apf_force(&sample.r_e, &sample.points, params),
            PlanMode::Eapf => {
                // a_e = 0: the attractive kinetic term lives in the inertia.
                let implicit = FieldSample {
                    a_e: DVector::zeros(n),
                    ..sample.clone()
                };
                eapf_force(&implicit, params) / eapf_inertia
            }
        };
        if !force.iter().all(|f| f.is_finite()) {
            return Err(Error::PlannerDiverged { what: "force", t });
        }

        out.path.push(q.clone());
        out.times.push(t);
        out.velocities.push(v.clone());
        out.forces.push(force.clone());

        if sample.r_e.norm() <= params.goal_tol {
            out.converged = true;
            break;
        }
        if t > params.t_max_plan {
            break;
        }

        history = Some(FieldHistory {
            v_e: v.clone(),
            v_o: sample.points.iter().map(|p| p.v_o).collect(),
        });

        // Semi-implicit Euler on unit virtual inertia.
        let qdd = force - params.damping * &v;
        v += dt * qdd;
        q += dt * &v;
        if !q.iter().all(|x| x.is_finite()) || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::PlannerDiverged { what: "state", t });
        }
        step += 1;
    }
    Ok(out)
}
