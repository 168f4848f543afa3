//! Minimum-jerk trajectory generation over planner waypoints.
//!
//! The planner emits a dense joint-space path; this module downsamples it to
//! a small set of knots (equal joint-space arc-length spacing), fits
//! per-joint piecewise quintics through the knots, and chooses the total
//! duration `T_f` by minimizing `jerk cost + λ·T` subject to velocity and
//! acceleration limits.
//!
//! Knot times are spaced proportionally to the joint-space distance between
//! consecutive knots (uniformly when all knots coincide). Boundary knots are
//! pinned to zero velocity and acceleration; interior knot velocities and
//! accelerations are free variables chosen to minimize the integrated
//! squared jerk `∫‖q⃛‖²dt`, which is a strictly convex quadratic in them.
//! Each segment is then the unique quintic matching position, velocity, and
//! acceleration at both ends.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Symmetric per-joint kinematic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    /// |q̇| bound (rad/s), > 0.
    pub vel_max: f64,
    /// |q̈| bound (rad/s²), > 0.
    pub acc_max: f64,
}

impl Limits {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.vel_max > 0.0 && self.vel_max.is_finite()) {
            return Err(format!("vel_max must be > 0 (got {})", self.vel_max));
        }
        if !(self.acc_max > 0.0 && self.acc_max.is_finite()) {
            return Err(format!("acc_max must be > 0 (got {})", self.acc_max));
        }
        Ok(())
    }
}

/// Piecewise-quintic joint trajectory.
///
/// Segment `s` spans `[knot_times[s], knot_times[s+1]]`; `coeffs[s][j]` are
/// the quintic coefficients `c0..c5` of joint `j` in the local time
/// `τ = t − knot_times[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub knot_times: Vec<f64>,
    pub knots: Vec<DVector<f64>>,
    pub coeffs: Vec<Vec<[f64; 6]>>,
}

impl Trajectory {
    pub fn n_joints(&self) -> usize {
        self.knots[0].len()
    }

    /// Total duration (s); trajectories always start at t = 0.
    pub fn duration(&self) -> f64 {
        *self.knot_times.last().unwrap()
    }

    fn segment_index(&self, t: f64) -> usize {
        let m = self.knot_times.len();
        self.knot_times
            .partition_point(|&kt| kt <= t)
            .saturating_sub(1)
            .min(m - 2)
    }

    /// Position, velocity, and acceleration at time `t`. Queries outside
    /// `[0, duration]` clamp to the endpoints (the arm holds its pose).
    pub fn evaluate(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let t = t.clamp(0.0, self.duration());
        let s = self.segment_index(t);
        let tau = t - self.knot_times[s];
        let n = self.n_joints();
        let mut q = DVector::zeros(n);
        let mut qd = DVector::zeros(n);
        let mut qdd = DVector::zeros(n);
        for j in 0..n {
            let c = &self.coeffs[s][j];
            q[j] = ((((c[5] * tau + c[4]) * tau + c[3]) * tau + c[2]) * tau + c[1]) * tau + c[0];
            qd[j] = (((5.0 * c[5] * tau + 4.0 * c[4]) * tau + 3.0 * c[3]) * tau + 2.0 * c[2])
                * tau
                + c[1];
            qdd[j] =
                ((20.0 * c[5] * tau + 12.0 * c[4]) * tau + 6.0 * c[3]) * tau + 2.0 * c[2];
        }
        (q, qd, qdd)
    }
}

/// Extrema of a trajectory against kinematic limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// max over time and joints of |q̇| (rad/s).
    pub max_vel: f64,
    /// max over time and joints of |q̈| (rad/s²).
    pub max_acc: f64,
    pub vel_ok: bool,
    pub acc_ok: bool,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.vel_ok && self.acc_ok
    }
}

/// Downsample a dense path to `count` knots at equal joint-space arc-length
/// intervals, keeping both endpoints exactly. A path with zero total length
/// collapses to two identical knots (a constant trajectory).
pub fn select_knots(path: &[DVector<f64>], count: usize) -> Result<Vec<DVector<f64>>> {
    if count < 2 {
        return Err(Error::InvalidKnotCount(count));
    }
    if path.is_empty() {
        return Err(Error::Config("cannot select knots from an empty path".into()));
    }
    let mut cumulative = Vec::with_capacity(path.len());
    cumulative.push(0.0);
    for w in path.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (&w[1] - &w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if total == 0.0 {
        return Ok(vec![path[0].clone(), path[0].clone()]);
    }

    let mut knots = Vec::with_capacity(count);
    knots.push(path[0].clone());
    let mut seg = 0usize;
    for k in 1..count - 1 {
        let target = total * k as f64 / (count - 1) as f64;
        while cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let alpha = if span > 0.0 {
            (target - cumulative[seg]) / span
        } else {
            0.0
        };
        knots.push(&path[seg] * (1.0 - alpha) + &path[seg + 1] * alpha);
    }
    knots.push(path.last().unwrap().clone());
    Ok(knots)
}

/// Knot times spaced proportionally to inter-knot distance, summing to
/// `total_time`; uniform when every knot coincides.
fn knot_time_spacing(knots: &[DVector<f64>], total_time: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let weights: Vec<f64> = knots.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
    let total: f64 = weights.iter().sum();
    let durations: Vec<f64> = if total == 0.0 {
        vec![total_time / weights.len() as f64; weights.len()]
    } else {
        let scaled: Vec<f64> = weights.iter().map(|w| total_time * w / total).collect();
        if let Some(s) = scaled.iter().position(|&h| h == 0.0) {
            return Err(Error::DuplicateKnotTimes(s));
        }
        scaled
    };
    let mut times = Vec::with_capacity(knots.len());
    times.push(0.0);
    for h in &durations {
        times.push(times.last().unwrap() + h);
    }
    *times.last_mut().unwrap() = total_time;
    Ok((times, durations))
}

/// Quadratic form of one segment's jerk integral in the local unknowns
/// `y = (v0, a0, v1, a1)` for fixed endpoint positions:
/// `J = yᵀAy + 2Δp·rᵀy + const`. Returns `(A, r)`.
///
/// The segment quintic is determined by Δ = (Δp, Δv, Δa) through
/// `(c3, c4, c5) = M(h)·Δ`, the jerk integral is `cᵀK(h)c`, and
/// `Δ = Δp·e₀ + D(h)·y`.
fn segment_quadratic(h: f64) -> (Matrix4<f64>, Vector4<f64>) {
    let h2 = h * h;
    let h3 = h2 * h;
    let h4 = h3 * h;
    let h5 = h4 * h;
    #[rustfmt::skip]
    let m = Matrix3::new(
        10.0 / h3,  -4.0 / h2,  0.5 / h,
       -15.0 / h4,   7.0 / h3, -1.0 / h2,
         6.0 / h5,  -3.0 / h4,  0.5 / h3,
    );
    #[rustfmt::skip]
    let k = Matrix3::new(
         36.0 * h,   72.0 * h2, 120.0 * h3,
         72.0 * h2, 192.0 * h3, 360.0 * h4,
        120.0 * h3, 360.0 * h4, 720.0 * h5,
    );
    let q = m.transpose() * k * m;
    #[rustfmt::skip]
    let d = Matrix3x4::new(
        -h,  -h2 / 2.0, 0.0, 0.0,
        -1.0, -h,       1.0, 0.0,
         0.0, -1.0,     0.0, 1.0,
    );
    let a = d.transpose() * q * d;
    let r = d.transpose() * q.column(0);
    (a, r)
}

/// Jerk-optimal interior knot velocities and accelerations (boundary knots
/// pinned to zero). Returns one `(velocity, acceleration)` vector pair per
/// knot.
pub(crate) fn solve_interior(
    knots: &[DVector<f64>],
    durations: &[f64],
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let m = knots.len();
    let n = knots[0].len();
    let mut vs = vec![DVector::zeros(n); m];
    let mut accs = vec![DVector::zeros(n); m];
    let n_free = 2 * (m - 2);
    if n_free == 0 {
        return (vs, accs);
    }

    // Global index of local unknown `l` of segment `s`, or None when pinned.
    let global = |s: usize, l: usize| -> Option<usize> {
        let (knot, kind) = (s + l / 2, l % 2);
        if knot == 0 || knot == m - 1 {
            None
        } else {
            Some(2 * (knot - 1) + kind)
        }
    };

    // The Hessian depends only on the segment durations, so it is shared by
    // all joints; the right-hand side carries the per-joint Δp.
    let mut hessian = DMatrix::zeros(n_free, n_free);
    let mut rhs = DMatrix::zeros(n_free, n);
    for s in 0..m - 1 {
        let (a, r) = segment_quadratic(durations[s]);
        for i in 0..4 {
            let Some(gi) = global(s, i) else { continue };
            for j in 0..4 {
                if let Some(gj) = global(s, j) {
                    hessian[(gi, gj)] += a[(i, j)];
                }
            }
            for joint in 0..n {
                let dp = knots[s + 1][joint] - knots[s][joint];
                rhs[(gi, joint)] -= r[i] * dp;
            }
        }
    }

    let solution = hessian
        .cholesky()
        .expect("jerk Hessian not positive definite")
        .solve(&rhs);
    for knot in 1..m - 1 {
        for joint in 0..n {
            vs[knot][joint] = solution[(2 * (knot - 1), joint)];
            accs[knot][joint] = solution[(2 * (knot - 1) + 1, joint)];
        }
    }
    (vs, accs)
}

/// Build the piecewise quintic matching position/velocity/acceleration at
/// every knot.
pub(crate) fn assemble(
    knots: &[DVector<f64>],
    knot_times: Vec<f64>,
    vs: &[DVector<f64>],
    accs: &[DVector<f64>],
) -> Trajectory {
    let m = knots.len();
    let n = knots[0].len();
    let mut coeffs = Vec::with_capacity(m - 1);
    for s in 0..m - 1 {
        let h = knot_times[s + 1] - knot_times[s];
        let (h2, h3) = (h * h, h * h * h);
        let (h4, h5) = (h3 * h, h3 * h * h);
        let mut seg = Vec::with_capacity(n);
        for j in 0..n {
            let (p0, v0, a0) = (knots[s][j], vs[s][j], accs[s][j]);
            let (p1, v1, a1) = (knots[s + 1][j], vs[s + 1][j], accs[s + 1][j]);
            let dp = p1 - p0 - v0 * h - 0.5 * a0 * h2;
            let dv = v1 - v0 - a0 * h;
            let da = a1 - a0;
            seg.push([
                p0,
                v0,
                0.5 * a0,
                (20.0 * dp - 8.0 * dv * h + da * h2) / (2.0 * h3),
                (-30.0 * dp + 14.0 * dv * h - 2.0 * da * h2) / (2.0 * h4),
                (12.0 * dp - 6.0 * dv * h + da * h2) / (2.0 * h5),
            ]);
        }
        coeffs.push(seg);
    }
    Trajectory {
        knot_times,
        knots: knots.to_vec(),
        coeffs,
    }
}

/// Fit the minimum-jerk piecewise quintic through `knots` with the given
/// total duration. Fails on fewer than two knots or when distinct knots are
/// assigned coincident times (adjacent duplicate knots in a path of nonzero
/// length).
pub fn fit_min_jerk(knots: &[DVector<f64>], total_time: f64) -> Result<Trajectory> {
    if knots.len() < 2 {
        return Err(Error::InvalidKnotCount(knots.len()));
    }
    assert!(
        total_time > 0.0 && total_time.is_finite(),
        "total_time must be > 0 (got {total_time})"
    );
    let n = knots[0].len();
    assert!(
        knots.iter().all(|k| k.len() == n),
        "knots must share one dimension"
    );
    let (knot_times, durations) = knot_time_spacing(knots, total_time)?;
    let (vs, accs) = solve_interior(knots, &durations);
    Ok(assemble(knots, knot_times, &vs, &accs))
}

/// Integrated squared jerk `∫₀ᵀ ‖q⃛‖² dt`, evaluated in closed form from the
/// quintic coefficients.
pub fn jerk_cost(traj: &Trajectory) -> f64 {
    let mut total = 0.0;
    for (s, seg) in traj.coeffs.iter().enumerate() {
        let h = traj.knot_times[s + 1] - traj.knot_times[s];
        let h2 = h * h;
        let h3 = h2 * h;
        let h4 = h3 * h;
        let h5 = h4 * h;
        #[rustfmt::skip]
        let k = Matrix3::new(
             36.0 * h,   72.0 * h2, 120.0 * h3,
             72.0 * h2, 192.0 * h3, 360.0 * h4,
            120.0 * h3, 360.0 * h4, 720.0 * h5,
        );
        for c in seg {
            let c345 = Vector3::new(c[3], c[4], c[5]);
            total += (k * c345).dot(&c345);
        }
    }
    total
}

/// Quadratic roots of `aτ² + bτ + c` appended to `out`.
fn quadratic_roots(a: f64, b: f64, c: f64, out: &mut Vec<f64>) {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return;
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() > 1e-14 * scale {
            out.push(-c / b);
        }
        return;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return;
    }
    let sq = disc.sqrt();
    // Citardauq form avoids cancellation for small roots.
    let q = -0.5 * (b + b.signum() * sq);
    out.push(q / a);
    if q != 0.0 {
        out.push(c / q);
    } else {
        out.push(0.0);
    }
}

/// Real roots of `aτ³ + bτ² + cτ + d` appended to `out` (Cardano/trig with a
/// Newton polish; falls back to the quadratic for a vanishing cubic term).
fn cubic_roots(a: f64, b: f64, c: f64, d: f64, out: &mut Vec<f64>) {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return;
    }
    if a.abs() <= 1e-13 * scale {
        quadratic_roots(b, c, d, out);
        return;
    }
    // Depressed form t³ + pt + q with τ = t − b/(3a).
    let (bn, cn, dn) = (b / a, c / a, d / a);
    let shift = bn / 3.0;
    let p = cn - bn * bn / 3.0;
    let q = 2.0 * bn * bn * bn / 27.0 - bn * cn / 3.0 + dn;
    let start = out.len();
    let half_q = q / 2.0;
    let disc = half_q * half_q + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let t = (-half_q + sq).cbrt() + (-half_q - sq).cbrt();
        out.push(t - shift);
    } else if p == 0.0 {
        out.push(-shift);
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        for k in 0..3 {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            out.push(t - shift);
        }
    }
    // Newton polish on the original cubic.
    for root in &mut out[start..] {
        for _ in 0..3 {
            let f = ((a * *root + b) * *root + c) * *root + d;
            let df = (3.0 * a * *root + 2.0 * b) * *root + c;
            if df.abs() > 1e-300 {
                *root -= f / df;
            }
        }
    }
}

/// Velocity and acceleration extrema of the trajectory. Per segment and
/// joint, |q̇| is checked at the endpoints and at the real roots of q̈ (a
/// cubic in local time) and |q̈| at the endpoints and the roots of the jerk
/// quadratic; a 1 kHz sweep over the whole duration backstops the root
/// finding.
pub fn constraint_report(traj: &Trajectory, limits: &Limits) -> ConstraintReport {
    let mut max_vel: f64 = 0.0;
    let mut max_acc: f64 = 0.0;
    let mut roots = Vec::new();
    for (s, seg) in traj.coeffs.iter().enumerate() {
        let h = traj.knot_times[s + 1] - traj.knot_times[s];
        for c in seg {
            let qd = |tau: f64| {
                (((5.0 * c[5] * tau + 4.0 * c[4]) * tau + 3.0 * c[3]) * tau + 2.0 * c[2]) * tau
                    + c[1]
            };
            let qdd = |tau: f64| {
                ((20.0 * c[5] * tau + 12.0 * c[4]) * tau + 6.0 * c[3]) * tau + 2.0 * c[2]
            };
            roots.clear();
            cubic_roots(20.0 * c[5], 12.0 * c[4], 6.0 * c[3], 2.0 * c[2], &mut roots);
            roots.extend([0.0, h]);
            for &tau in &roots {
                if (0.0..=h).contains(&tau) {
                    max_vel = max_vel.max(qd(tau).abs());
                }
            }
            roots.clear();
            quadratic_roots(60.0 * c[5], 24.0 * c[4], 6.0 * c[3], &mut roots);
            roots.extend([0.0, h]);
            for &tau in &roots {
                if (0.0..=h).contains(&tau) {
                    max_acc = max_acc.max(qdd(tau).abs());
                }
            }
        }
    }
    // Dense sweep as a safety net against root-finder edge cases.
    let steps = (traj.duration() * 1000.0).ceil() as usize;
    for i in 0..=steps {
        let t = traj.duration() * i as f64 / steps.max(1) as f64;
        let (_, qd, qdd) = traj.evaluate(t);
        max_vel = max_vel.max(qd.amax());
        max_acc = max_acc.max(qdd.amax());
    }
    ConstraintReport {
        max_vel,
        max_acc,
        vel_ok: max_vel <= limits.vel_max,
        acc_ok: max_acc <= limits.acc_max,
    }
}

const T_SEARCH_LO: f64 = 1e-3;
const T_MIN_TOL: f64 = 1e-3;
const T_GOLDEN_TOL: f64 = 1e-4;

/// Fit trajectories over a range of durations and pick `T_f` minimizing
/// `jerk_cost + λ·T`, subject to the limits.
///
/// The minimum feasible duration is located by bisection (feasibility is
/// monotone in T: stretching time scales velocities by 1/T and accelerations
/// by 1/T²); the penalized objective is then minimized by golden-section
/// search on `[T_min, max(t_max, T_min)]`. Fails with `NoFeasibleDuration`
/// when even `t_max` violates the limits.
pub fn optimize_knots(
    knots: &[DVector<f64>],
    limits: &Limits,
    lambda: f64,
    t_max: f64,
) -> Result<(Trajectory, ConstraintReport)> {
    assert!(lambda >= 0.0 && lambda.is_finite(), "lambda must be ≥ 0");
    assert!(t_max > T_SEARCH_LO, "t_max must exceed {T_SEARCH_LO}");
    let feasible = |t: f64| -> Result<bool> {
        let traj = fit_min_jerk(knots, t)?;
        Ok(constraint_report(&traj, limits).feasible())
    };

    let t_min = if feasible(T_SEARCH_LO)? {
        T_SEARCH_LO
    } else {
        if !feasible(t_max)? {
            return Err(Error::NoFeasibleDuration {
                lo: T_SEARCH_LO,
                hi: t_max,
            });
        }
        let (mut lo, mut hi) = (T_SEARCH_LO, t_max);
        while hi - lo > T_MIN_TOL {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let objective = |t: f64| -> Result<f64> {
        let traj = fit_min_jerk(knots, t)?;
        Ok(jerk_cost(&traj) + lambda * t)
    };
    let (mut a, mut b) = (t_min, t_max.max(t_min));
    if b > a {
        let invphi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let mut fc = objective(c)?;
        let mut fd = objective(d)?;
        while b - a > T_GOLDEN_TOL {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = objective(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = objective(d)?;
            }
        }
    }
    let t_f = 0.5 * (a + b);
    let traj = fit_min_jerk(knots, t_f)?;
    let report = constraint_report(&traj, limits);
    Ok((traj, report))
}

/// Full trajectory stage: downsample the planner path to `knot_count` knots,
/// then fit and time-optimize.
pub fn optimize_trajectory(
    path: &[DVector<f64>],
    knot_count: usize,
    limits: &Limits,
    lambda: f64,
    t_max: f64,
) -> Result<(Trajectory, ConstraintReport)> {
    let knots = select_knots(path, knot_count)?;
    optimize_knots(&knots, limits, lambda, t_max)
}
