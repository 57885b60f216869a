//! Oracles shared by the integration tests. None of them call into the
//! library's dynamics: a link-frame recursive Newton–Euler written from the
//! textbook recursion, a naive transform product, and finite differences.
#![allow(dead_code)]

use armctl_kinematics::nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use armctl_kinematics::{forward_kinematics, DhRow, JointFriction, RobotModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dh(row: &DhRow, q: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let (st, ct) = (q + row.theta_offset).sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    let t = Matrix4::new(
        ct, -st * ca, st * sa, row.a * ct, //
        st, ct * ca, -ct * sa, row.a * st, //
        0.0, sa, ca, row.d, //
        0.0, 0.0, 0.0, 1.0,
    );
    (
        t.fixed_view::<3, 3>(0, 0).into_owned(),
        t.fixed_view::<3, 1>(0, 3).into_owned(),
    )
}

/// Link-frame Newton–Euler: every quantity of link `i` lives in frame `i`.
pub fn oracle_rnea(
    model: &RobotModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    qdd: &DVector<f64>,
    gravity: Vector3<f64>,
) -> DVector<f64> {
    let n = model.dof();
    let z0 = Vector3::z();
    let mut rot = Vec::new();
    let mut r = Vec::new();
    for i in 0..n {
        let (ri, pi) = dh(&model.dh_rows[i], q[i]);
        r.push(ri.transpose() * pi);
        rot.push(ri);
    }
    let mut w = Vector3::zeros();
    let mut wd = Vector3::zeros();
    let mut ae = -gravity;
    let mut f_link = Vec::new();
    let mut n_link = Vec::new();
    for i in 0..n {
        let rt = rot[i].transpose();
        let w_prev = w;
        w = rt * (w_prev + z0 * qd[i]);
        wd = rt * (wd + z0 * qdd[i] + w_prev.cross(&(z0 * qd[i])));
        ae = rt * ae + wd.cross(&r[i]) + w.cross(&w.cross(&r[i]));
        let c = model.link_coms[i];
        let ac = ae + wd.cross(&c) + w.cross(&w.cross(&c));
        let inertia = model.link_inertias[i];
        f_link.push(model.link_masses[i] * ac);
        n_link.push(inertia * wd + w.cross(&(inertia * w)));
    }
    let mut tau = DVector::zeros(n);
    let mut f_next = Vector3::zeros();
    let mut n_next = Vector3::zeros();
    for i in (0..n).rev() {
        let (f_out, n_out) = if i + 1 < n {
            (rot[i + 1] * f_next, rot[i + 1] * n_next)
        } else {
            (Vector3::zeros(), Vector3::zeros())
        };
        let c = model.link_coms[i];
        let f = f_link[i] + f_out;
        // moment about the joint-i anchor, which sits at -r_i in frame i
        let moment = n_link[i] + n_out - c.cross(&f_out) + (r[i] + c).cross(&f);
        tau[i] = moment.dot(&(rot[i].transpose() * z0));
        f_next = f;
        n_next = moment;
    }
    tau
}

pub fn oracle_potential(model: &RobotModel, q: &DVector<f64>) -> f64 {
    let mut rot = Matrix3::identity();
    let mut pos = Vector3::zeros();
    let mut energy = 0.0;
    for i in 0..model.dof() {
        let (ri, pi) = dh(&model.dh_rows[i], q[i]);
        pos += rot * pi;
        rot *= ri;
        let com = pos + rot * model.link_coms[i];
        energy -= model.link_masses[i] * model.gravity.dot(&com);
    }
    energy
}

pub fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        model.dof(),
        model.joint_limits.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)),
    )
}

pub fn random_qd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn frictionless(mut model: RobotModel) -> RobotModel {
    for f in &mut model.friction {
        *f = JointFriction {
            viscous: 0.0,
            coulomb: 0.0,
        };
    }
    model
}

/// Jacobian of the tool by central differences of forward kinematics; the
/// angular rows come from `dR R^T`.
pub fn fd_jacobian(model: &RobotModel, q: &DVector<f64>) -> DMatrix<f64> {
    let n = model.dof();
    let h = 1e-6;
    let mut jac = DMatrix::zeros(6, n);
    let rot = forward_kinematics(model, q).unwrap().tcp_rotation;
    for k in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let fp = forward_kinematics(model, &qp).unwrap();
        let fm = forward_kinematics(model, &qm).unwrap();
        let v = (fp.pose.position - fm.pose.position) / (2.0 * h);
        let w = (fp.tcp_rotation - fm.tcp_rotation) / (2.0 * h) * rot.transpose();
        let omega = Vector3::new(w[(2, 1)] - w[(1, 2)], w[(0, 2)] - w[(2, 0)], w[(1, 0)] - w[(0, 1)]) * 0.5;
        for i in 0..3 {
            jac[(i, k)] = v[i];
            jac[(i + 3, k)] = omega[i];
        }
    }
    jac
}

/// `M_dot` along `q_dot` by central differences of the mass matrix.
pub fn mdot_fd(m: impl Fn(&DVector<f64>) -> DMatrix<f64>, q: &DVector<f64>, qd: &DVector<f64>) -> DMatrix<f64> {
    let h = 1e-6;
    (m(&(q + qd * h)) - m(&(q - qd * h))) / (2.0 * h)
}
