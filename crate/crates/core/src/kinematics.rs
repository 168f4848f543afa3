//! Modified Denavit-Hartenberg kinematics for serial revolute chains.
//!
//! The chain is described per link by the four modified-DH parameters
//! (α_{i−1}, a_{i−1}, d_i, θ_i) plus inertial data, and a fixed end-effector
//! offset after the last link frame. Frame i is attached to link i and joint i
//! rotates about that frame's z axis.

use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};

/// Rigid transform as an explicit rotation matrix plus translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    /// Orthonormal rotation, det = +1.
    pub rotation: Matrix3<f64>,
    /// Translation in the parent frame (m).
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Composition `self ∘ other` (apply `other` first in the local frame).
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Map a point expressed in this frame into the parent frame.
    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Per-link modified-DH and inertial parameters.
///
/// The inertia tensor is taken about the link's centre of mass, expressed in
/// the link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// Twist α_{i−1} about the previous x axis (rad).
    pub alpha_prev: f64,
    /// Offset a_{i−1} along the previous x axis (m).
    pub a_prev: f64,
    /// Offset d_i along the joint axis (m).
    pub d: f64,
    /// Fixed joint-angle offset added to q_i (rad).
    pub theta_offset: f64,
    /// Link mass (kg), > 0.
    pub mass: f64,
    /// Centre of mass in the link frame (m).
    pub com: Vector3<f64>,
    /// Symmetric positive-definite inertia tensor about the COM, link frame
    /// (kg·m²). Principal moments must satisfy the triangle inequality.
    pub inertia: Matrix3<f64>,
}

/// A serial revolute manipulator: ordered links, gravity and EE offset.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub links: Vec<LinkParams>,
    /// Gravitational acceleration in the base frame (m/s²),
    /// e.g. (0, 0, −9.81).
    pub gravity: Vector3<f64>,
    /// Fixed transform from the last link frame to the end-effector frame.
    pub ee_offset: Transform,
}

impl RobotModel {
    /// Number of joints.
    pub fn n(&self) -> usize {
        self.links.len()
    }

    /// Check every model invariant; returns a message naming the first
    /// violation. Used by the file loader; programmatically built test models
    /// (e.g. point-mass pendulums with zero rotational inertia) may skip it.
    pub fn validate(&self) -> Result<(), String> {
        if self.links.is_empty() {
            return Err("links: at least one link required".into());
        }
        for (i, link) in self.links.iter().enumerate() {
            if !(link.mass > 0.0) {
                return Err(format!("links[{i}].mass must be > 0 (got {})", link.mass));
            }
            let sym_err = (link.inertia - link.inertia.transpose()).norm();
            if sym_err > 1e-12 {
                return Err(format!("links[{i}].inertia must be symmetric"));
            }
            let eig = link.inertia.symmetric_eigenvalues();
            let mut principal = [eig[0], eig[1], eig[2]];
            principal.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if !(principal[0] > 0.0) {
                return Err(format!(
                    "links[{i}].inertia must be positive definite (min eigenvalue {:.3e})",
                    principal[0]
                ));
            }
            // Physical realizability: each principal moment is at most the
            // sum of the other two.
            if principal[2] > (principal[0] + principal[1]) * (1.0 + 1e-9) {
                return Err(format!(
                    "links[{i}].inertia violates the principal-moment triangle inequality"
                ));
            }
            for v in [link.alpha_prev, link.a_prev, link.d, link.theta_offset] {
                if !v.is_finite() {
                    return Err(format!("links[{i}]: non-finite DH parameter"));
                }
            }
            if !link.com.iter().all(|c| c.is_finite()) {
                return Err(format!("links[{i}].com must be finite"));
            }
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err("gravity must be finite".into());
        }
        let r = &self.ee_offset.rotation;
        if (r.transpose() * r - Matrix3::identity()).norm() > 1e-9 {
            return Err("ee_offset.rotation must be orthonormal".into());
        }
        if (r.determinant() - 1.0).abs() > 1e-9 {
            return Err("ee_offset.rotation must have determinant +1".into());
        }
        Ok(())
    }
}

/// Linear and angular point Jacobian, 3×n each.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// Linear velocity rows: ṗ = jv · q̇.
    pub jv: Matrix3xX<f64>,
    /// Angular velocity rows: ω = jw · q̇.
    pub jw: Matrix3xX<f64>,
}

fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Single modified-DH link transform
/// `R_x(α_{i−1}) · D_x(a_{i−1}) · R_z(θ_i) · D_z(d_i)`, composed in exactly
/// that order.
pub fn dh_transform(alpha_prev: f64, a_prev: f64, theta: f64, d: f64) -> Transform {
    let rx = Transform {
        rotation: rot_x(alpha_prev),
        translation: Vector3::zeros(),
    };
    let dx = Transform {
        rotation: Matrix3::identity(),
        translation: Vector3::new(a_prev, 0.0, 0.0),
    };
    let rz = Transform {
        rotation: rot_z(theta),
        translation: Vector3::zeros(),
    };
    let dz = Transform {
        rotation: Matrix3::identity(),
        translation: Vector3::new(0.0, 0.0, d),
    };
    rx.compose(&dx).compose(&rz).compose(&dz)
}

/// Base-frame poses of link frames 1..n followed by the end-effector frame
/// (n + 1 transforms in total).
///
/// # Panics
/// If `q.len() != model.n()`.
pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Vec<Transform> {
    assert_eq!(
        q.len(),
        model.n(),
        "joint vector length {} does not match model with {} links",
        q.len(),
        model.n()
    );
    let mut frames = Vec::with_capacity(model.n() + 1);
    let mut cumulative = Transform::identity();
    for (i, link) in model.links.iter().enumerate() {
        let local = dh_transform(
            link.alpha_prev,
            link.a_prev,
            q[i] + link.theta_offset,
            link.d,
        );
        cumulative = cumulative.compose(&local);
        frames.push(cumulative.clone());
    }
    frames.push(cumulative.compose(&model.ee_offset));
    frames
}

/// Jacobian of a point rigidly attached to a frame.
///
/// `frame_index` is 1-based: 1..=n selects a link frame, n+1 the end-effector
/// frame. `point_local` is expressed in that frame. Columns for joints beyond
/// the attachment frame are exactly zero.
///
/// # Panics
/// If `q.len() != model.n()` or `frame_index` is out of `1..=n+1`.
pub fn point_jacobian(
    model: &RobotModel,
    q: &DVector<f64>,
    frame_index: usize,
    point_local: &Vector3<f64>,
) -> Jacobian {
    let n = model.n();
    assert!(
        (1..=n + 1).contains(&frame_index),
        "frame_index {frame_index} out of range 1..={}",
        n + 1
    );
    let frames = forward_kinematics(model, q);
    point_jacobian_with_frames(model, &frames, frame_index, point_local)
}

/// Same as [`point_jacobian`] but reuses already-computed frames, which keeps
/// the dynamics assembly at one FK evaluation per configuration.
pub(crate) fn point_jacobian_with_frames(
    model: &RobotModel,
    frames: &[Transform],
    frame_index: usize,
    point_local: &Vector3<f64>,
) -> Jacobian {
    let n = model.n();
    let p = frames[frame_index - 1].apply_point(point_local);
    let mut jv = Matrix3xX::zeros(n);
    let mut jw = Matrix3xX::zeros(n);
    // Joints after the attachment frame cannot move the point; the EE frame
    // (index n + 1) depends on all n joints.
    let moving = frame_index.min(n);
    for k in 0..moving {
        let axis = frames[k].rotation.column(2).into_owned();
        let origin = frames[k].translation;
        jv.set_column(k, &axis.cross(&(p - origin)));
        jw.set_column(k, &axis);
    }
    Jacobian { jv, jw }
}
