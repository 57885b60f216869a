//! Plant checks against the independent oracles in `common`.

mod common;

use std::f64::consts::PI;

use armctl::dynamics::{
    coriolis_matrix, forward_dynamics, gravity_torque, inverse_dynamics, kinetic_energy,
    mass_matrix, step, JointState,
};
use armctl_kinematics::nalgebra::{DVector, Matrix3, Vector3};
use common::{frictionless, oracle_potential, oracle_rnea, random_q, random_qd};
use armctl_kinematics::{DhRow, JointFriction, RobotModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn mass_matrix_matches_unit_acceleration_oracle() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let zero = DVector::zeros(7);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let m = mass_matrix(&model, &q).unwrap();
        for k in 0..7 {
            let mut e = DVector::zeros(7);
            e[k] = 1.0;
            let col = oracle_rnea(&model, &q, &zero, &e, Vector3::zeros());
            assert!((m.column(k) - col).amax() < 1e-9);
        }
    }
}

#[test]
fn mass_matrix_is_spd_everywhere() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let m = mass_matrix(&model, &random_q(&model, &mut rng)).unwrap();
        assert!((&m - m.transpose()).amax() < 1e-12);
        assert!(m.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn coriolis_matches_velocity_product_oracle() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(7, 2.0, &mut rng);
        let c = coriolis_matrix(&model, &q, &qd).unwrap();
        let oracle = oracle_rnea(&model, &q, &qd, &DVector::zeros(7), Vector3::zeros());
        assert!((c * &qd - oracle).amax() < 1e-8);
    }
}

#[test]
fn inverse_dynamics_matches_oracle_with_gravity() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(7, 2.0, &mut rng);
        let qdd = random_qd(7, 5.0, &mut rng);
        let tau = inverse_dynamics(&model, &q, &qd, &qdd).unwrap();
        let oracle = oracle_rnea(&model, &q, &qd, &qdd, model.gravity);
        assert!((tau - oracle).amax() < 1e-9);
    }
}

#[test]
fn gravity_is_the_potential_gradient() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = 1e-6;
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let g = gravity_torque(&model, &q).unwrap();
        for k in 0..7 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            let grad = (oracle_potential(&model, &qp) - oracle_potential(&model, &qm)) / (2.0 * h);
            assert!((g[k] - grad).abs() < 1e-5, "joint {k}: {} vs {grad}", g[k]);
        }
    }
}

#[test]
fn mdot_minus_two_c_is_skew() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(7, 2.0, &mut rng);
        let c = coriolis_matrix(&model, &q, &qd).unwrap();
        let s = common::mdot_fd(|q| mass_matrix(&model, q).unwrap(), &q, &qd) - 2.0 * &c;
        assert!((&s + s.transpose()).amax() < 1e-6);
        // the quadratic form vanishes identically, also with the exact M_dot = C + C^T
        let exact = &c + c.transpose() - 2.0 * &c;
        assert!(qd.dot(&(exact * &qd)).abs() < 1e-8);
        assert!(qd.dot(&(&s * &qd)).abs() < 1e-6);
    }
}

#[test]
fn free_motion_conserves_kinetic_energy() {
    let mut model = frictionless(RobotModel::kuka_lwr4());
    model.gravity = Vector3::zeros();
    let mut state = JointState {
        q: DVector::from_vec(vec![0.0, 2.0 * PI / 9.0, 0.0, -PI / 2.0, 0.0, 5.0 * PI / 18.0, 0.0]),
        qdot: DVector::from_vec(vec![0.3, -0.2, 0.4, 0.25, -0.5, 0.3, 0.6]),
        t: 0.0,
    };
    let zero = DVector::zeros(7);
    let e0 = kinetic_energy(&model, &state.q, &state.qdot).unwrap();
    for _ in 0..10_000 {
        state = step(&model, &state, &zero, &zero, 1e-3).unwrap();
    }
    let e1 = kinetic_energy(&model, &state.q, &state.qdot).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
    assert!((state.t - 10.0).abs() < 1e-9);
}

#[test]
fn pendulum_period_matches_large_amplitude_formula() {
    let (m, l, g) = (1.5, 0.4, 9.81);
    let model = RobotModel {
        name: "pendulum".into(),
        dh_rows: vec![DhRow {
            a: 0.0,
            alpha: 0.0,
            d: 0.0,
            theta_offset: 0.0,
        }],
        link_masses: vec![m],
        link_coms: vec![Vector3::new(l, 0.0, 0.0)],
        link_inertias: vec![Matrix3::identity() * 1e-9],
        friction: vec![JointFriction {
            viscous: 0.0,
            coulomb: 0.0,
        }],
        coulomb_velocity_scale: 0.01,
        joint_limits: vec![(-PI, PI)],
        torque_limits: vec![80.0],
        gravity: Vector3::new(g, 0.0, 0.0),
        tool_offset: Vector3::zeros(),
    };
    let theta0: f64 = 0.2;
    let mut state = JointState::at_rest(DVector::from_element(1, theta0));
    let zero = DVector::zeros(1);
    let dt = 1e-3;
    // time of the first return to rest at +theta0 via velocity sign changes
    let mut crossings = Vec::new();
    let mut prev_v: f64 = 0.0;
    while crossings.len() < 3 && state.t < 10.0 {
        let next = step(&model, &state, &zero, &zero, dt).unwrap();
        let v = next.qdot[0];
        if prev_v != 0.0 && v.signum() != prev_v.signum() {
            // linear interpolation of the zero crossing
            crossings.push(state.t + dt * prev_v.abs() / (prev_v.abs() + v.abs()));
        }
        prev_v = v;
        state = next;
    }
    let period = crossings[2] - crossings[0];
    let expected = 2.0 * PI * (l / g).sqrt() * (1.0 + theta0 * theta0 / 16.0);
    assert!(((period - expected) / expected).abs() < 0.01, "{period} vs {expected}");
}

#[test]
fn gravity_compensated_plant_is_passive() {
    let model = RobotModel::kuka_lwr4();
    let mut state = JointState {
        q: DVector::from_vec(vec![0.2, 0.6, -0.3, -1.3, 0.2, 0.8, 0.1]),
        qdot: DVector::from_vec(vec![0.4, -0.3, 0.5, 0.2, -0.6, 0.4, 0.8]),
        t: 0.0,
    };
    let zero = DVector::zeros(7);
    let mut last = kinetic_energy(&model, &state.q, &state.qdot).unwrap();
    for _ in 0..3000 {
        let g = gravity_torque(&model, &state.q).unwrap();
        state = step(&model, &state, &g, &zero, 1e-3).unwrap();
        let e = kinetic_energy(&model, &state.q, &state.qdot).unwrap();
        // gravity is held over the step, so allow integration round-off
        assert!(e <= last + 1e-9, "{last} -> {e}");
        last = e;
    }
}

#[test]
fn integration_is_bit_deterministic() {
    let model = RobotModel::kuka_lwr4();
    let run = || {
        let mut s = JointState {
            q: DVector::from_vec(vec![0.1, 0.5, -0.2, -1.2, 0.3, 0.7, 0.0]),
            qdot: DVector::from_element(7, 0.1),
            t: 0.0,
        };
        let tau = DVector::from_fn(7, |i, _| (i as f64).sin());
        for _ in 0..500 {
            s = step(&model, &s, &tau, &DVector::zeros(7), 1e-3).unwrap();
        }
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(a.q.as_slice(), b.q.as_slice());
    assert_eq!(a.qdot.as_slice(), b.qdot.as_slice());
}

#[test]
fn forward_dynamics_inverts_inverse_dynamics() {
    let model = frictionless(RobotModel::kuka_lwr4());
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(7, 1.0, &mut rng);
        let qdd = random_qd(7, 3.0, &mut rng);
        let tau = inverse_dynamics(&model, &q, &qd, &qdd).unwrap();
        let back = forward_dynamics(&model, &q, &qd, &tau, &DVector::zeros(7)).unwrap();
        assert!((back - qdd).amax() < 1e-8);
    }
}
