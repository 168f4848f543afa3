//! Public-API integration checks: the full plan → optimize → track →
//! measure pipeline driven exactly the way downstream callers use it,
//! verifying the structural invariants that every stage promises.

use std::f64::consts::FRAC_PI_2;

use eapf_core::{
    run_pipeline, FieldParams, Gains, Limits, LinkParams, Obstacle, PipelineParams, PlanMode,
    RobotModel, Scene, SimConfig, Transform,
};
use nalgebra::{dvector, Matrix3, Vector3};

/// Planar two-link arm (0.8 m + 0.5 m), gravity-free.
fn two_link() -> RobotModel {
    let link = |a_prev: f64, l: f64, mass: f64| LinkParams {
        alpha_prev: 0.0,
        a_prev,
        d: 0.0,
        theta_offset: 0.0,
        mass,
        com: Vector3::new(l / 2.0, 0.0, 0.0),
        inertia: Matrix3::from_diagonal(&Vector3::new(1e-3, mass * l * l / 12.0, mass * l * l / 12.0)),
    };
    RobotModel {
        links: vec![link(0.0, 0.8, 1.2), link(0.8, 0.5, 0.8)],
        gravity: Vector3::zeros(),
        ee_offset: Transform {
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.5, 0.0, 0.0),
        },
    }
}

fn params(mode: PlanMode) -> PipelineParams {
    PipelineParams {
        field: FieldParams::default(),
        mode,
        limits: Limits {
            vel_max: 10.0,
            acc_max: 50.0,
        },
        lambda: 100.0,
        knot_count: 10,
        t_max: 10.0,
        gains: Gains::uniform(2, 49.0, 11.2),
        sim: SimConfig {
            dt: 1e-3,
            t_extra: 0.5,
            arrival_tol: 0.05,
        },
    }
}

/// Invariants every successful run must satisfy, regardless of mode or
/// scene contents.
fn check_invariants(mode: PlanMode, scene: &Scene) {
    let model = two_link();
    let q_start = dvector![0.0, 0.0];
    let q_goal = dvector![FRAC_PI_2, -0.4];
    let p = params(mode);
    let result = run_pipeline(&model, scene, &q_start, &q_goal, &p).unwrap();

    // Planner output: aligned arrays, strictly increasing virtual time,
    // path starting at the start configuration.
    let w = &result.waypoints;
    assert!(w.converged, "{} planner should converge", mode.as_str());
    assert_eq!(w.path.len(), w.times.len());
    assert_eq!(w.path.len(), w.velocities.len());
    assert_eq!(w.path.len(), w.forces.len());
    assert_eq!(w.path[0], q_start);
    assert!(w.times.windows(2).all(|t| t[1] > t[0]));

    // Optimized trajectory: rest-to-rest, endpoints pinned to the planned
    // boundary configurations, within the declared limits.
    let traj = &result.trajectory;
    let (q0, qd0, _) = traj.evaluate(0.0);
    let (qf, qdf, _) = traj.evaluate(traj.duration());
    assert!((q0 - &q_start).norm() < 1e-9);
    assert!((qf - &q_goal).norm() < 1e-9, "trajectory must end at the goal");
    assert!(qd0.norm() < 1e-9 && qdf.norm() < 1e-9);
    assert!(result.constraints.feasible());

    // Simulation log: uniform 1 kHz grid covering duration + settle window.
    let log = &result.log;
    assert_eq!(log.rows[0].t, 0.0);
    for (k, row) in log.rows.iter().enumerate() {
        assert!((row.t - k as f64 * p.sim.dt).abs() < 1e-12);
    }
    let t_last = log.rows.last().unwrap().t;
    assert!(t_last >= traj.duration() + p.sim.t_extra - p.sim.dt);

    // Metrics agree with the log they were computed from.
    let m = &result.metrics;
    assert!(m.collision_free);
    let arrival = m.arrival_time.expect("arm should settle at the goal");
    for row in log.rows.iter().filter(|r| r.t >= arrival) {
        assert!(
            row.dist_goal <= p.sim.arrival_tol,
            "distance exceeded tolerance after arrival"
        );
    }
    if scene.obstacles.is_empty() {
        assert_eq!(m.min_clearance, f64::INFINITY);
    } else {
        let logged = log
            .rows
            .iter()
            .map(|r| r.dist_obs)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(m.min_clearance, logged);
    }
    assert_eq!(
        m.final_error,
        log.rows.last().unwrap().dist_goal,
        "final error must be the last logged goal distance"
    );
}

#[test]
fn pipeline_invariants_hold_in_empty_scene() {
    let scene = Scene { obstacles: vec![] };
    check_invariants(PlanMode::Apf, &scene);
    check_invariants(PlanMode::Eapf, &scene);
}

#[test]
fn pipeline_invariants_hold_with_an_obstacle_near_the_path() {
    // Sphere floating above the arm's plane, close enough that the swept
    // arc grazes its influence shell but far enough that both modes still
    // converge.
    let scene = Scene {
        obstacles: vec![Obstacle::Sphere {
            center: Vector3::new(0.9, 0.75, 0.38),
            radius: 0.08,
        }],
    };
    check_invariants(PlanMode::Apf, &scene);
    check_invariants(PlanMode::Eapf, &scene);
}

#[test]
fn modes_differ_in_obstructed_scenes() {
    // Same scene, different force law: the planned paths must not be
    // identical (the kinetic terms change transit behaviour).
    let model = two_link();
    let scene = Scene {
        obstacles: vec![Obstacle::Sphere {
            center: Vector3::new(0.9, 0.75, 0.38),
            radius: 0.08,
        }],
    };
    let q_start = dvector![0.0, 0.0];
    let q_goal = dvector![FRAC_PI_2, -0.4];
    let apf = run_pipeline(&model, &scene, &q_start, &q_goal, &params(PlanMode::Apf)).unwrap();
    let eapf = run_pipeline(&model, &scene, &q_start, &q_goal, &params(PlanMode::Eapf)).unwrap();
    let same_len = apf.waypoints.path.len() == eapf.waypoints.path.len();
    let identical = same_len
        && apf
            .waypoints
            .path
            .iter()
            .zip(&eapf.waypoints.path)
            .all(|(a, b)| a == b);
    assert!(!identical, "both modes produced the exact same path");
}

#[test]
fn rest_start_pipeline_is_reproducible() {
    let model = two_link();
    let scene = Scene {
        obstacles: vec![Obstacle::Sphere {
            center: Vector3::new(0.9, 0.75, 0.38),
            radius: 0.08,
        }],
    };
    let q_start = dvector![0.0, 0.0];
    let q_goal = dvector![FRAC_PI_2, -0.4];
    let p = params(PlanMode::Eapf);
    let a = run_pipeline(&model, &scene, &q_start, &q_goal, &p).unwrap();
    let b = run_pipeline(&model, &scene, &q_start, &q_goal, &p).unwrap();
    assert_eq!(a.waypoints.path, b.waypoints.path);
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.metrics, b.metrics);
}
