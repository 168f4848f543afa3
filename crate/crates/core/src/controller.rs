//! Computed-torque trajectory tracking.
//!
//! The control law cancels the manipulator dynamics and imposes decoupled
//! second-order error dynamics on every joint:
//!
//! ```text
//! τ = M(q)·(q̈_d + Kp∘e + Kd∘ė) + C(q, q̇)·q̇ + G(q),   e = q_d − q
//! ```
//!
//! With an exact model each joint error then obeys ë + kd·ė + kp·e = 0, so
//! per-joint gains `(kp, kd) = (ω², 2ζω)` place the closed-loop poles
//! directly.

use crate::dynamics::{DynamicsTerms, JointState};
use crate::kinematics::RobotModel;
use nalgebra::DVector;

/// Per-joint PD gains for the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub kp: DVector<f64>,
    pub kd: DVector<f64>,
}

impl Gains {
    /// Identical gains on every joint.
    pub fn uniform(n: usize, kp: f64, kd: f64) -> Self {
        Self {
            kp: DVector::from_element(n, kp),
            kd: DVector::from_element(n, kd),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.kp.len() != self.kd.len() {
            return Err(format!(
                "kp and kd dimensions differ ({} vs {})",
                self.kp.len(),
                self.kd.len()
            ));
        }
        for (name, v) in [("kp", &self.kp), ("kd", &self.kd)] {
            if !v.iter().all(|g| *g > 0.0 && g.is_finite()) {
                return Err(format!("{name} gains must all be > 0"));
            }
        }
        Ok(())
    }
}

/// Computed-torque command for tracking the desired `(q_d, q̇_d, q̈_d)` from
/// the measured state.
pub fn computed_torque(
    model: &RobotModel,
    state: &JointState,
    q_d: &DVector<f64>,
    qd_d: &DVector<f64>,
    qdd_d: &DVector<f64>,
    gains: &Gains,
) -> DVector<f64> {
    let n = model.n();
    assert_eq!(q_d.len(), n, "q_d length does not match model");
    assert_eq!(gains.kp.len(), n, "gains length does not match model");
    let e = q_d - &state.q;
    let ed = qd_d - &state.qd;
    let v = qdd_d + gains.kp.component_mul(&e) + gains.kd.component_mul(&ed);
    let terms = DynamicsTerms::at(model, &state.q, &state.qd);
    terms.m * v + terms.c * &state.qd + &terms.g
}
