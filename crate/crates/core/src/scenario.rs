//! Versioned TOML schemas for robot descriptions and experiment scenarios.
//!
//! Two file kinds exist:
//!
//! * **robot files** — the kinematic/dynamic description of an arm: modified
//!   Denavit-Hartenberg parameters, per-link mass properties, gravity, and a
//!   fixed end-effector offset;
//! * **scenario files** — one experiment: which robot file to use, start and
//!   goal configurations, obstacles, field gains, optimizer settings, and
//!   simulation parameters.
//!
//! Both carry a `version` field (currently 1) and reject unknown keys, so
//! typos fail loudly instead of silently falling back to defaults.

use crate::kinematics::{LinkParams, RobotModel, Transform};
use crate::potential_field::{FieldParams, Obstacle, PlanMode, Scene};
use crate::simulator::{PipelineParams, SimConfig};
use crate::trajectory_opt::Limits;
use crate::{controller, Error, Result};
use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const SCHEMA_VERSION: u32 = 1;

fn matrix_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    // Extrinsic x-y-z convention: R = Rz(yaw)·Ry(pitch)·Rx(roll).
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Symmetric inertia tensor about the link's centre of mass, in the link
/// frame (kg·m²). Off-diagonal products default to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InertiaSpec {
    ixx: f64,
    iyy: f64,
    izz: f64,
    #[serde(default)]
    ixy: f64,
    #[serde(default)]
    ixz: f64,
    #[serde(default)]
    iyz: f64,
}

impl InertiaSpec {
    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.ixx, self.ixy, self.ixz, self.ixy, self.iyy, self.iyz, self.ixz, self.iyz,
            self.izz,
        )
    }
}

/// One link entry of a robot file (modified DH + mass properties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSpec {
    alpha_prev: f64,
    a_prev: f64,
    d: f64,
    theta_offset: f64,
    mass: f64,
    com: [f64; 3],
    inertia: InertiaSpec,
}

/// Fixed transform from the last joint frame to the end-effector point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EeOffsetSpec {
    #[serde(default)]
    translation: [f64; 3],
    /// Extrinsic roll-pitch-yaw (rad).
    #[serde(default)]
    rotation_rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    version: u32,
    name: String,
    /// Gravity vector in the base frame (m/s²).
    gravity: [f64; 3],
    #[serde(default)]
    ee_offset: EeOffsetSpec,
    links: Vec<LinkSpec>,
}

/// Parse a robot description from TOML text.
pub fn parse_robot(text: &str) -> Result<RobotModel> {
    let file: RobotFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("robot file: {e}")))?;
    if file.version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "robot file: unsupported version {} (expected {SCHEMA_VERSION})",
            file.version
        )));
    }
    if file.links.is_empty() {
        return Err(Error::Config("robot file: links must not be empty".into()));
    }
    let links = file
        .links
        .iter()
        .map(|l| LinkParams {
            alpha_prev: l.alpha_prev,
            a_prev: l.a_prev,
            d: l.d,
            theta_offset: l.theta_offset,
            mass: l.mass,
            com: Vector3::from(l.com),
            inertia: l.inertia.matrix(),
        })
        .collect();
    let [roll, pitch, yaw] = file.ee_offset.rotation_rpy;
    let model = RobotModel {
        links,
        gravity: Vector3::from(file.gravity),
        ee_offset: Transform {
            rotation: matrix_rpy(roll, pitch, yaw),
            translation: Vector3::from(file.ee_offset.translation),
        },
    };
    model
        .validate()
        .map_err(|e| Error::Config(format!("robot file: {e}")))?;
    Ok(model)
}

/// Load and validate a robot description file.
pub fn load_robot(path: &Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read robot file {}: {e}", path.display()))
    })?;
    parse_robot(&text)
}

/// PD gains for one controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    pub kp: f64,
    pub kd: f64,
}

/// Tracking gains per planning mode (the two modes are tuned separately).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeGains {
    pub apf: GainSpec,
    pub eapf: GainSpec,
}

impl ModeGains {
    pub fn for_mode(&self, mode: PlanMode) -> GainSpec {
        match mode {
            PlanMode::Apf => self.apf,
            PlanMode::Eapf => self.eapf,
        }
    }
}

/// Trajectory-stage settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Time penalty λ in `jerk cost + λ·T`.
    pub lambda: f64,
    /// Number of knots the planner path is downsampled to (≥ 2).
    pub knot_count: usize,
    /// |q̇| limit (rad/s).
    pub vel_max: f64,
    /// |q̈| limit (rad/s²).
    pub acc_max: f64,
    /// Upper bound of the duration search (s).
    #[serde(default = "OptimizerConfig::default_t_max")]
    pub t_max: f64,
}

impl OptimizerConfig {
    fn default_t_max() -> f64 {
        10.0
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("optimizer.lambda must be ≥ 0 (got {})", self.lambda));
        }
        if self.knot_count < 2 {
            return Err(format!(
                "optimizer.knot_count must be ≥ 2 (got {})",
                self.knot_count
            ));
        }
        Limits {
            vel_max: self.vel_max,
            acc_max: self.acc_max,
        }
        .validate()
        .map_err(|e| format!("optimizer.{e}"))?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(format!("optimizer.t_max must be > 0 (got {})", self.t_max));
        }
        Ok(())
    }
}

/// One obstacle entry. `type` selects the shape: `"sphere"` uses `center` +
/// `radius`; `"cylinder"` additionally needs `axis` and `height` (and
/// `center` is the centre of its base disc).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl ObstacleSpec {
    fn to_obstacle(&self, index: usize) -> Result<Obstacle> {
        let at = |msg: String| Error::Config(format!("obstacles[{index}]: {msg}"));
        let obstacle = match self.kind.as_str() {
            "sphere" => {
                if self.axis.is_some() || self.height.is_some() {
                    return Err(at("sphere does not take `axis` or `height`".into()));
                }
                Obstacle::Sphere {
                    center: Vector3::from(self.center),
                    radius: self.radius,
                }
            }
            "cylinder" => Obstacle::Cylinder {
                base_center: Vector3::from(self.center),
                axis: Vector3::from(
                    self.axis
                        .ok_or_else(|| at("cylinder requires `axis`".into()))?,
                ),
                height: self
                    .height
                    .ok_or_else(|| at("cylinder requires `height`".into()))?,
                radius: self.radius,
            },
            other => {
                return Err(at(format!(
                    "unknown type `{other}` (expected \"sphere\" or \"cylinder\")"
                )))
            }
        };
        obstacle.validate().map_err(|e| at(e))?;
        Ok(obstacle)
    }
}

/// A complete experiment description (one TOML file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    /// Robot file path, resolved relative to the scenario file's directory.
    pub robot: String,
    pub q_start: Vec<f64>,
    pub q_goal: Vec<f64>,
    pub field: FieldParams,
    pub gains: ModeGains,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

impl ScenarioConfig {
    /// Parse and validate a scenario from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Serialize back to TOML (round-trips through [`Self::from_toml_str`]).
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("scenario: {msg}")));
        if self.version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                self.version
            ));
        }
        if self.q_start.is_empty() {
            return fail("q_start must not be empty".into());
        }
        if self.q_start.len() != self.q_goal.len() {
            return fail(format!(
                "q_start and q_goal dimensions differ ({} vs {})",
                self.q_start.len(),
                self.q_goal.len()
            ));
        }
        for (name, v) in [("q_start", &self.q_start), ("q_goal", &self.q_goal)] {
            if !v.iter().all(|x| x.is_finite()) {
                return fail(format!("{name} must be finite"));
            }
        }
        self.field
            .validate()
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        for (mode, g) in [("apf", self.gains.apf), ("eapf", self.gains.eapf)] {
            if !(g.kp > 0.0 && g.kp.is_finite() && g.kd > 0.0 && g.kd.is_finite()) {
                return fail(format!("gains.{mode}: kp and kd must be > 0"));
            }
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        self.simulation
            .validate()
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        for (i, spec) in self.obstacles.iter().enumerate() {
            spec.to_obstacle(i)?;
        }
        Ok(())
    }

    /// Build the validated obstacle scene.
    pub fn scene(&self) -> Result<Scene> {
        let obstacles = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, spec)| spec.to_obstacle(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene { obstacles })
    }

    pub fn q_start_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.q_start.clone())
    }

    pub fn q_goal_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.q_goal.clone())
    }

    /// Assemble the pipeline inputs for one planning mode.
    pub fn pipeline_params(&self, mode: PlanMode) -> PipelineParams {
        let n = self.q_start.len();
        let g = self.gains.for_mode(mode);
        PipelineParams {
            field: self.field.clone(),
            mode,
            limits: Limits {
                vel_max: self.optimizer.vel_max,
                acc_max: self.optimizer.acc_max,
            },
            lambda: self.optimizer.lambda,
            knot_count: self.optimizer.knot_count,
            t_max: self.optimizer.t_max,
            gains: controller::Gains::uniform(n, g.kp, g.kd),
            sim: self.simulation,
        }
    }
}

/// Load a scenario file plus the robot it references. Checks that the
/// configuration dimensions match the robot.
pub fn parse_scenario(path: &Path) -> Result<(ScenarioConfig, RobotModel, Scene)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read scenario file {}: {e}", path.display()))
    })?;
    let config = ScenarioConfig::from_toml_str(&text)?;
    let robot_path = {
        let p = PathBuf::from(&config.robot);
        if p.is_absolute() {
            p
        } else {
            path.parent().unwrap_or(Path::new(".")).join(p)
        }
    };
    let model = load_robot(&robot_path)?;
    if config.q_start.len() != model.n() {
        return Err(Error::Config(format!(
            "scenario: q_start has {} entries but robot `{}` has {} joints",
            config.q_start.len(),
            config.robot,
            model.n()
        )));
    }
    let scene = config.scene()?;
    Ok((config, model, scene))
}
