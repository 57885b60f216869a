//! Independent oracles for the kinematic chain: a naive homogeneous-transform
//! product and central finite differences.

use armctl_kinematics::nalgebra::{DVector, Matrix4, Vector3, Vector4};
use armctl_kinematics::{
    contact_jacobian, contact_point, forward_kinematics, jacobian, JacobianSet, RobotModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dh_matrix(a: f64, alpha: f64, d: f64, theta: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Matrix4::new(
        ct, -st * ca, st * sa, a * ct, //
        st, ct * ca, -ct * sa, a * st, //
        0.0, sa, ca, d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

fn naive_fk(model: &RobotModel, q: &DVector<f64>, upto: usize, offset: &Vector3<f64>) -> Vector3<f64> {
    let mut t = Matrix4::identity();
    for (row, qi) in model.dh_rows.iter().zip(q.iter()).take(upto) {
        t *= dh_matrix(row.a, row.alpha, row.d, qi + row.theta_offset);
    }
    let p = t * Vector4::new(offset.x, offset.y, offset.z, 1.0);
    Vector3::new(p.x, p.y, p.z)
}

fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        model.dof(),
        model
            .joint_limits
            .iter()
            .map(|(lo, hi)| rng.random_range(0.9 * lo..0.9 * hi)),
    )
}

#[test]
fn fk_matches_transform_product() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let fk = forward_kinematics(&model, &q).unwrap();
        let oracle = naive_fk(&model, &q, 7, &model.tool_offset);
        assert!((fk.pose.position - oracle).amax() < 1e-10);
        for (i, origin) in fk.link_origins.iter().enumerate() {
            let o = naive_fk(&model, &q, i + 1, &Vector3::zeros());
            assert!((origin - o).amax() < 1e-10);
        }
    }
}

fn finite_difference_check(link: usize, offset: Vector3<f64>, seed: u64) {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let jac = if link == 7 && offset == model.tool_offset {
            jacobian(&model, &q).unwrap()
        } else {
            contact_jacobian(&model, &q, link, &offset).unwrap()
        };
        for k in 0..7 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            let dp = (contact_point(&model, &qp, link, &offset).unwrap()
                - contact_point(&model, &qm, link, &offset).unwrap())
                / (2.0 * h);
            let col = jac.fixed_view::<3, 1>(0, k);
            assert!((col - dp).amax() < 1e-5, "joint {k}: {col} vs {dp}");
        }
    }
}

#[test]
fn tcp_jacobian_matches_finite_differences() {
    finite_difference_check(7, RobotModel::kuka_lwr4().tool_offset, 2);
}

#[test]
fn elbow_contact_jacobian_matches_finite_differences() {
    finite_difference_check(4, Vector3::zeros(), 3);
    finite_difference_check(4, Vector3::new(0.05, -0.03, 0.1), 4);
}

#[test]
fn rotational_rows_are_joint_axes() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = random_q(&model, &mut rng);
    let jac = jacobian(&model, &q).unwrap();
    let h = 1e-6;
    // angular velocity from the finite-difference rotation derivative
    for k in 0..7 {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let rp = forward_kinematics(&model, &qp).unwrap().tcp_rotation;
        let rm = forward_kinematics(&model, &qm).unwrap().tcp_rotation;
        let r = forward_kinematics(&model, &q).unwrap().tcp_rotation;
        let skew = (rp - rm) / (2.0 * h) * r.transpose();
        let w = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
        assert!((jac.fixed_view::<3, 1>(3, k) - w).amax() < 1e-6);
    }
}

#[test]
fn projector_algebra_over_random_configurations() {
    let model = RobotModel::kuka_lwr4();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 100 {
        let q = random_q(&model, &mut rng);
        let set = JacobianSet::new(jacobian(&model, &q).unwrap()).unwrap();
        if set.damping > 0.0 {
            continue;
        }
        let n = &set.null;
        assert!((n * n - n).amax() < 1e-8);
        assert!((&set.jacobian * n).amax() < 1e-8);
        assert!((n - n.transpose()).amax() < 1e-8);
        let eye = &set.jacobian * &set.pinv;
        assert!((eye - armctl_kinematics::nalgebra::Matrix6::identity()).amax() < 1e-8);
        checked += 1;
    }
}
