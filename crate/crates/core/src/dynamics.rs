//! Euler-Lagrange rigid-body dynamics assembled from link Jacobians.
//!
//! The joint-space model is `M(q)·q̈ + C(q, q̇)·q̇ + G(q) = τ` with
//!
//! * `M(q) = Σ_i mᵢ·J_viᵀ·J_vi + J_ωiᵀ·Rᵢ·Iᵢ·Rᵢᵀ·J_ωi` (J_vi at the link COM),
//! * `C` from Christoffel symbols of the first kind, using central finite
//!   differences of `M` with step [`DM_STEP`],
//! * `G(q) = Σ_i J_viᵀ·(−mᵢ·g) = ∂V/∂q` for the potential
//!   `V(q) = −Σ_i mᵢ·gᵀ·p_ci` (which increases with height for a downward g).

use crate::kinematics::{forward_kinematics, point_jacobian_with_frames, RobotModel};
use nalgebra::{DMatrix, DVector};

/// Central-difference step for ∂M/∂q_k in the Coriolis assembly. Chosen so the
/// truncation and roundoff errors balance near 1e-10, which keeps
/// `q̇ᵀ(Ṁ − 2C)q̇` skew-symmetric to well below 1e-6.
pub const DM_STEP: f64 = 1e-6;

/// Joint-space state (positions and velocities of equal length).
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Self {
        assert_eq!(q.len(), qd.len(), "q and qd lengths differ");
        Self { q, qd }
    }
}

/// The three Euler-Lagrange terms evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl DynamicsTerms {
    /// Evaluate `M`, `C` and `G` at `(q, q̇)`.
    pub fn at(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>) -> Self {
        Self {
            m: mass_matrix(model, q),
            c: coriolis_matrix(model, q, qd),
            g: gravity_vector(model, q),
        }
    }
}

/// Joint-space mass matrix (n×n, symmetric positive definite for valid link
/// inertias).
///
/// # Panics
/// If `q.len() != model.n()`.
pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n();
    let frames = forward_kinematics(model, q);
    let mut m = DMatrix::zeros(n, n);
    for (i, link) in model.links.iter().enumerate() {
        let jac = point_jacobian_with_frames(model, &frames, i + 1, &link.com);
        let r = frames[i].rotation;
        let inertia_world = r * link.inertia * r.transpose();
        // mᵢ·J_vᵀJ_v + J_ωᵀ·I_world·J_ω, accumulated in place.
        m.gemm_tr(link.mass, &jac.jv, &jac.jv, 1.0);
        let iw_jw = inertia_world * &jac.jw;
        m.gemm_tr(1.0, &jac.jw, &iw_jw, 1.0);
    }
    m
}

/// Coriolis/centrifugal matrix from Christoffel symbols of the first kind:
/// `C_ij = Σ_k ½(∂M_ij/∂q_k + ∂M_ik/∂q_j − ∂M_jk/∂q_i)·q̇_k`,
/// with `∂M/∂q` by central finite differences (step [`DM_STEP`]).
///
/// # Panics
/// If `q.len() != model.n()` or `qd.len() != model.n()`.
pub fn coriolis_matrix(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n();
    assert_eq!(qd.len(), n, "qd length {} does not match model", qd.len());
    let dm: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += DM_STEP;
            qm[k] -= DM_STEP;
            (mass_matrix(model, &qp) - mass_matrix(model, &qm)) / (2.0 * DM_STEP)
        })
        .collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut cij = 0.0;
            for k in 0..n {
                cij += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qd[k];
            }
            c[(i, j)] = cij;
        }
    }
    c
}

/// Gravity torque vector `G(q) = Σ_i J_vi(com)ᵀ·(−mᵢ·g)`.
///
/// # Panics
/// If `q.len() != model.n()`.
pub fn gravity_vector(model: &RobotModel, q: &DVector<f64>) -> DVector<f64> {
    let n = model.n();
    let frames = forward_kinematics(model, q);
    let mut g = DVector::zeros(n);
    for (i, link) in model.links.iter().enumerate() {
        let jac = point_jacobian_with_frames(model, &frames, i + 1, &link.com);
        let w = -link.mass * model.gravity;
        g.gemv_tr(1.0, &jac.jv, &w, 1.0);
    }
    g
}

/// Gravitational potential energy `V(q) = −Σ_i mᵢ·gᵀ·p_ci`, the antiderivative
/// of [`gravity_vector`] (∂V/∂q = G).
pub fn potential_energy(model: &RobotModel, q: &DVector<f64>) -> f64 {
    let frames = forward_kinematics(model, q);
    model
        .links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let p_com = frames[i].apply_point(&link.com);
            -link.mass * model.gravity.dot(&p_com)
        })
        .sum()
}

/// Total mechanical energy `½·q̇ᵀ·M(q)·q̇ + V(q)`.
pub fn total_energy(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    let m = mass_matrix(model, q);
    0.5 * qd.dot(&(&m * qd)) + potential_energy(model, q)
}

/// Forward dynamics `q̈ = M(q)⁻¹·(τ − C(q, q̇)·q̇ − G(q))` via Cholesky solve.
///
/// # Panics
/// On dimension mismatch, or if the mass matrix is not positive definite
/// (violated model data invariant).
pub fn forward_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    tau: &DVector<f64>,
) -> DVector<f64> {
    let n = model.n();
    assert_eq!(tau.len(), n, "tau length {} does not match model", tau.len());
    let terms = DynamicsTerms::at(model, q, qd);
    let rhs = tau - &terms.c * qd - &terms.g;
    terms
        .m
        .cholesky()
        .expect("mass matrix not positive definite: invalid link inertia data")
        .solve(&rhs)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kinematics::{LinkParams, Transform};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{Matrix3, Vector3};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    pub(crate) const G0: f64 = 9.81;

    /// Point-mass pendulum in the xy-plane, joint about z, gravity along −y.
    /// With θ_offset = −π/2 the joint angle is measured from the downward
    /// vertical, so V(q) = −m·g·L·cos(q) and G(q) = m·g·L·sin(q).
    pub(crate) fn pendulum(mass: f64, length: f64) -> RobotModel {
        RobotModel {
            links: vec![LinkParams {
                alpha_prev: 0.0,
                a_prev: 0.0,
                d: 0.0,
                theta_offset: -FRAC_PI_2,
                mass,
                com: Vector3::new(length, 0.0, 0.0),
                inertia: Matrix3::zeros(),
            }],
            gravity: Vector3::new(0.0, -G0, 0.0),
            ee_offset: Transform {
                rotation: Matrix3::identity(),
                translation: Vector3::new(length, 0.0, 0.0),
            },
        }
    }

    pub(crate) fn random_arm(rng: &mut StdRng, n: usize) -> RobotModel {
        let links = (0..n)
            .map(|_| {
                // Box-like principal moments keep the triangle inequality.
                let (a, b, c) = (
                    rng.gen_range(1e-3..5e-2),
                    rng.gen_range(1e-3..5e-2),
                    rng.gen_range(1e-3..5e-2),
                );
                LinkParams {
                    alpha_prev: rng.gen_range(-PI..PI),
                    a_prev: rng.gen_range(-0.3..0.3),
                    d: rng.gen_range(-0.3..0.3),
                    theta_offset: rng.gen_range(-PI..PI),
                    mass: rng.gen_range(0.3..2.5),
                    com: Vector3::new(
                        rng.gen_range(-0.15..0.15),
                        rng.gen_range(-0.15..0.15),
                        rng.gen_range(-0.15..0.15),
                    ),
                    inertia: Matrix3::from_diagonal(&Vector3::new(a + b, b + c, a + c)),
                }
            })
            .collect();
        RobotModel {
            links,
            gravity: Vector3::new(0.0, 0.0, -G0),
            ee_offset: Transform::identity(),
        }
    }

    #[test]
    fn pendulum_mass_matrix() {
        let (m, l) = (1.3, 0.6);
        let model = pendulum(m, l);
        for q1 in [-1.0, 0.0, 0.4, 2.2] {
            let q = nalgebra::dvector![q1];
            let mm = mass_matrix(&model, &q);
            assert_relative_eq!(mm[(0, 0)], m * l * l, epsilon = 1e-14);
        }
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy_oracle() {
        // ½q̇ᵀMq̇ must equal Σᵢ ½mᵢ‖v_ci‖² + ½ωᵢᵀ(R Iᵢ Rᵀ)ωᵢ where v_ci and ωᵢ
        // come from finite differences of the frames, independent of the
        // Jacobian code path.
        let mut rng = StdRng::seed_from_u64(0x00d1);
        let eps = 1e-7;
        for _ in 0..30 {
            let n = rng.gen_range(1..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let qd = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

            let mm = mass_matrix(&model, &q);
            let lhs = 0.5 * qd.dot(&(&mm * &qd));

            let fp = forward_kinematics(&model, &(q.clone() + eps * &qd));
            let fm = forward_kinematics(&model, &(q.clone() - eps * &qd));
            let f0 = forward_kinematics(&model, &q);
            let mut rhs = 0.0;
            for (i, link) in model.links.iter().enumerate() {
                let v = (fp[i].apply_point(&link.com) - fm[i].apply_point(&link.com))
                    / (2.0 * eps);
                let omega_skew =
                    (fp[i].rotation - fm[i].rotation) / (2.0 * eps) * f0[i].rotation.transpose();
                let w = Vector3::new(
                    omega_skew[(2, 1)],
                    omega_skew[(0, 2)],
                    omega_skew[(1, 0)],
                );
                let iw = f0[i].rotation * link.inertia * f0[i].rotation.transpose();
                rhs += 0.5 * link.mass * v.norm_squared() + 0.5 * w.dot(&(iw * w));
            }
            assert_relative_eq!(lhs, rhs, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let mut rng = StdRng::seed_from_u64(0x00d2);
        for _ in 0..100 {
            let n = rng.gen_range(1..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let mm = mass_matrix(&model, &q);
            assert!((&mm - mm.transpose()).norm() <= 1e-9 * mm.norm().max(1.0));
            let chol = mm.clone().cholesky();
            assert!(chol.is_some(), "mass matrix not positive definite");
        }
    }

    #[test]
    fn coriolis_vanishes_for_configuration_independent_mass() {
        // A single link has constant M, so every Christoffel symbol is zero.
        let model = pendulum(1.0, 0.5);
        let c = coriolis_matrix(
            &model,
            &nalgebra::dvector![0.7],
            &nalgebra::dvector![2.0],
        );
        assert_abs_diff_eq!(c[(0, 0)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn coriolis_skew_symmetry() {
        // xᵀ(Ṁ − 2C)x ≈ 0 with Ṁ estimated by central differences along q̇.
        let mut rng = StdRng::seed_from_u64(0x00d3);
        let eps = 1e-6;
        for _ in 0..50 {
            let n = rng.gen_range(2..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let qd = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

            let c = coriolis_matrix(&model, &q, &qd);
            let mdot = (mass_matrix(&model, &(q.clone() + eps * &qd))
                - mass_matrix(&model, &(q.clone() - eps * &qd)))
                / (2.0 * eps);
            let s = mdot - 2.0 * c;
            assert!(
                x.dot(&(&s * &x)).abs() <= 1e-6,
                "xᵀ(Ṁ−2C)x = {:e}",
                x.dot(&(&s * &x))
            );
        }
    }

    #[test]
    fn gravity_vector_pendulum_analytic() {
        let (m, l) = (2.0, 0.75);
        let model = pendulum(m, l);
        for q1 in [-2.0, -0.5, 0.0, 0.3, 1.9] {
            let g = gravity_vector(&model, &nalgebra::dvector![q1]);
            assert_relative_eq!(g[0], m * G0 * l * q1.sin(), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn gravity_vector_matches_potential_gradient() {
        let mut rng = StdRng::seed_from_u64(0x00d4);
        let eps = 1e-6;
        for _ in 0..50 {
            let n = rng.gen_range(1..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let g = gravity_vector(&model, &q);
            for k in 0..n {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += eps;
                qm[k] -= eps;
                let fd = (potential_energy(&model, &qp) - potential_energy(&model, &qm))
                    / (2.0 * eps);
                assert_abs_diff_eq!(g[k], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn total_energy_pendulum_at_rest() {
        // Hanging straight down at rest: all potential, V = −m·g·L.
        let (m, l) = (1.1, 0.4);
        let model = pendulum(m, l);
        let e = total_energy(&model, &nalgebra::dvector![0.0], &nalgebra::dvector![0.0]);
        assert_relative_eq!(e, -m * G0 * l, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn forward_dynamics_gravity_compensation_rest() {
        // τ = G at zero velocity must give exactly zero acceleration.
        let mut rng = StdRng::seed_from_u64(0x00d5);
        for _ in 0..20 {
            let n = rng.gen_range(1..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let qd = DVector::zeros(n);
            let tau = gravity_vector(&model, &q);
            let qdd = forward_dynamics(&model, &q, &qd, &tau);
            assert!(qdd.norm() <= 1e-12, "‖q̈‖ = {:e}", qdd.norm());
        }
    }

    #[test]
    fn forward_dynamics_residual() {
        // M·q̈ + C·q̇ + G must reproduce τ to 1e-10.
        let mut rng = StdRng::seed_from_u64(0x00d6);
        for _ in 0..30 {
            let n = rng.gen_range(1..=7);
            let model = random_arm(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
            let qd = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let tau = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let qdd = forward_dynamics(&model, &q, &qd, &tau);
            let terms = DynamicsTerms::at(&model, &q, &qd);
            let residual = &terms.m * &qdd + &terms.c * &qd + &terms.g - &tau;
            assert!(residual.norm() <= 1e-10, "residual = {:e}", residual.norm());
        }
    }
}
