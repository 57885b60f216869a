//! Rigid-body plant: `M q_ddot + C q_dot + G = tau_total + tau_f + tau_ext`.
//!
//! Everything is computed in the base frame from the DH chain. Joint `j`
//! (0-based here) turns about axis `a_j` through anchor `o_j`; link `i` is
//! moved by joints `0..=i`.

use armctl_kinematics::nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use armctl_kinematics::{chain_frames, KinematicsError, RobotModel};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("mass matrix is not positive definite")]
    SingularMass,
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub t: f64,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        JointState {
            q,
            qdot: DVector::zeros(n),
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.iter().all(|v| v.is_finite())
            && self.qdot.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
}

/// Base-frame geometry of every link at one configuration.
struct Links {
    axes: Vec<Vector3<f64>>,
    anchors: Vec<Vector3<f64>>,
    coms: Vec<Vector3<f64>>,
    /// About the COM, base frame.
    inertias: Vec<Matrix3<f64>>,
    masses: Vec<f64>,
}

impl Links {
    fn new(model: &RobotModel, q: &DVector<f64>) -> Result<Self, DynamicsError> {
        let chain = chain_frames(model, q)?;
        let n = model.dof();
        let mut links = Links {
            axes: Vec::with_capacity(n),
            anchors: Vec::with_capacity(n),
            coms: Vec::with_capacity(n),
            inertias: Vec::with_capacity(n),
            masses: model.link_masses.clone(),
        };
        for i in 0..n {
            links.axes.push(chain.frames[i].z_axis());
            links.anchors.push(chain.frames[i].origin);
            let f = &chain.frames[i + 1];
            links.coms.push(f.transform_point(&model.link_coms[i]));
            links
                .inertias
                .push(f.rotation * model.link_inertias[i] * f.rotation.transpose());
        }
        Ok(links)
    }

    fn len(&self) -> usize {
        self.axes.len()
    }

    /// Mass, COM and inertia about that COM of links `k..n`, for every `k`.
    fn composites(&self) -> Vec<(f64, Vector3<f64>, Matrix3<f64>)> {
        let n = self.len();
        let mut out = vec![(0.0, Vector3::zeros(), Matrix3::zeros()); n];
        let mut mass = 0.0;
        let mut moment = Vector3::zeros();
        // inertia about the base origin accumulates without a moving reference
        let mut inertia_origin = Matrix3::zeros();
        for k in (0..n).rev() {
            let m = self.masses[k];
            let c = self.coms[k];
            mass += m;
            moment += m * c;
            inertia_origin += self.inertias[k] + m * parallel_axis(&c);
            let com = moment / mass;
            out[k] = (mass, com, inertia_origin - mass * parallel_axis(&com));
        }
        out
    }

    /// Linear-velocity Jacobian column of joint `j` for point `x`.
    fn lin(&self, j: usize, x: &Vector3<f64>) -> Vector3<f64> {
        self.axes[j].cross(&(x - self.anchors[j]))
    }
}

/// `S(r)^T S(r)`: inertia of a unit point mass at `r` about the origin.
fn parallel_axis(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() * r.norm_squared() - r * r.transpose()
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected != got {
        return Err(DynamicsError::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

fn mass_matrix_from(links: &Links) -> DMatrix<f64> {
    let n = links.len();
    let comp = links.composites();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let (mc, cc, ic) = &comp[k];
        let ak = links.axes[k];
        // rate of momentum of the subtree k..n for a unit acceleration of joint k
        let force = *mc * links.lin(k, cc);
        let moment = ic * ak;
        for j in 0..=k {
            let tau = links.axes[j].dot(&(moment + (cc - links.anchors[j]).cross(&force)));
            m[(j, k)] = tau;
            m[(k, j)] = tau;
        }
    }
    m
}

fn gravity_from(links: &Links, gravity: &Vector3<f64>) -> DVector<f64> {
    let comp = links.composites();
    DVector::from_fn(links.len(), |j, _| {
        let (mc, cc, _) = &comp[j];
        -links.axes[j].dot(&(cc - links.anchors[j]).cross(&(*mc * gravity)))
    })
}

/// Recursive Newton–Euler in the base frame. With `gravity_on` the result is
/// `M qdd + C qd + G`, otherwise `M qdd + C qd`.
fn rnea(links: &Links, gravity: &Vector3<f64>, qd: &DVector<f64>, qdd: &DVector<f64>) -> DVector<f64> {
    let n = links.len();
    let mut omega = Vector3::zeros();
    let mut omega_dot = Vector3::zeros();
    // acceleration of the current anchor; gravity enters as a base acceleration
    let mut acc = -gravity;
    let mut prev_anchor = links.anchors[0];
    let mut forces = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    for i in 0..n {
        let o = links.anchors[i];
        let d = o - prev_anchor;
        acc += omega_dot.cross(&d) + omega.cross(&omega.cross(&d));
        prev_anchor = o;
        let a = links.axes[i];
        omega_dot += a * qdd[i] + omega.cross(&(a * qd[i]));
        omega += a * qd[i];
        let r = links.coms[i] - o;
        let acc_com = acc + omega_dot.cross(&r) + omega.cross(&omega.cross(&r));
        let inertia = &links.inertias[i];
        forces.push(links.masses[i] * acc_com);
        moments.push(inertia * omega_dot + omega.cross(&(inertia * omega)));
    }
    let mut tau = DVector::zeros(n);
    let mut f_next = Vector3::zeros();
    let mut n_next = Vector3::zeros();
    for i in (0..n).rev() {
        let o = links.anchors[i];
        let arm_next = if i + 1 < n { links.anchors[i + 1] - o } else { Vector3::zeros() };
        let f = forces[i] + f_next;
        let mom = moments[i] + (links.coms[i] - o).cross(&forces[i]) + n_next + arm_next.cross(&f_next);
        tau[i] = links.axes[i].dot(&mom);
        f_next = f;
        n_next = mom;
    }
    tau
}

pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    Ok(mass_matrix_from(&Links::new(model, q)?))
}

pub fn gravity_torque(model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>, DynamicsError> {
    Ok(gravity_from(&Links::new(model, q)?, &model.gravity))
}

/// `C q_dot + G`.
pub fn bias_torque(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    check_len("qdot", model.dof(), qdot.len())?;
    let links = Links::new(model, q)?;
    Ok(rnea(&links, &model.gravity, qdot, &DVector::zeros(model.dof())))
}

/// `M qdd + C qd + G` by recursive Newton–Euler.
pub fn inverse_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qddot: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    check_len("qdot", model.dof(), qdot.len())?;
    check_len("qddot", model.dof(), qddot.len())?;
    let links = Links::new(model, q)?;
    Ok(rnea(&links, &model.gravity, qdot, qddot))
}

/// `dM/dq_k` for every `k`, from the link-Jacobian form
/// `M = sum_i m_i Jv_i^T Jv_i + Jw_i^T I_i Jw_i`.
pub fn mass_matrix_derivatives(
    model: &RobotModel,
    q: &DVector<f64>,
) -> Result<Vec<DMatrix<f64>>, DynamicsError> {
    let links = Links::new(model, q)?;
    let n = links.len();
    let mut out = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        let c = links.coms[i];
        let mi = links.masses[i];
        let inertia = links.inertias[i];
        let jv: Vec<Vector3<f64>> = (0..=i).map(|j| links.lin(j, &c)).collect();
        for (k, dm) in out.iter_mut().enumerate().take(i + 1) {
            let ak = links.axes[k];
            let mut djv = vec![Vector3::zeros(); i + 1];
            let mut djw = vec![Vector3::zeros(); i + 1];
            for j in 0..=i {
                let aj = links.axes[j];
                if k < j {
                    djv[j] = ak.cross(&jv[j]);
                    djw[j] = ak.cross(&aj);
                } else {
                    djv[j] = aj.cross(&ak.cross(&(c - links.anchors[k])));
                }
            }
            let d_inertia = skew(&ak) * inertia - inertia * skew(&ak);
            for a in 0..=i {
                for b in 0..=i {
                    let (wa, wb) = (links.axes[a], links.axes[b]);
                    dm[(a, b)] += mi * (djv[a].dot(&jv[b]) + jv[a].dot(&djv[b]))
                        + djw[a].dot(&(inertia * wb))
                        + wa.dot(&(d_inertia * wb))
                        + wa.dot(&(inertia * djw[b]));
                }
            }
        }
    }
    Ok(out)
}

/// Coriolis matrix from the Christoffel symbols of `M`, so that
/// `M_dot - 2 C` is skew-symmetric.
pub fn coriolis_matrix(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DMatrix<f64>, DynamicsError> {
    let n = model.dof();
    check_len("qdot", n, qdot.len())?;
    let dm = mass_matrix_derivatives(model, q)?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k])
            .sum()
    }))
}

pub fn dynamics_terms(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DynamicsTerms, DynamicsError> {
    Ok(DynamicsTerms {
        m: mass_matrix(model, q)?,
        c: coriolis_matrix(model, q, qdot)?,
        g: gravity_torque(model, q)?,
    })
}

/// Viscous plus tanh-smoothed Coulomb friction; always opposes motion.
pub fn friction_torque(model: &RobotModel, qdot: &DVector<f64>) -> DVector<f64> {
    let eps = model.coulomb_velocity_scale;
    DVector::from_iterator(
        qdot.len(),
        qdot.iter()
            .zip(&model.friction)
            .map(|(v, f)| -(f.viscous * v + f.coulomb * (v / eps).tanh())),
    )
}

pub fn kinetic_energy(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<f64, DynamicsError> {
    let m = mass_matrix(model, q)?;
    Ok(0.5 * qdot.dot(&(m * qdot)))
}

/// Gravitational potential energy, zero at the base origin.
pub fn potential_energy(model: &RobotModel, q: &DVector<f64>) -> Result<f64, DynamicsError> {
    let links = Links::new(model, q)?;
    Ok(links
        .coms
        .iter()
        .zip(&links.masses)
        .map(|(c, m)| -m * model.gravity.dot(c))
        .sum())
}

/// `q_ddot` for the given applied torques; friction is added here.
pub fn forward_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    tau_total: &DVector<f64>,
    tau_ext: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    let n = model.dof();
    check_len("qdot", n, qdot.len())?;
    check_len("tau_total", n, tau_total.len())?;
    check_len("tau_ext", n, tau_ext.len())?;
    let links = Links::new(model, q)?;
    let m = mass_matrix_from(&links);
    let bias = rnea(&links, &model.gravity, qdot, &DVector::zeros(n));
    let rhs = tau_total + friction_torque(model, qdot) + tau_ext - bias;
    let chol = m.cholesky().ok_or(DynamicsError::SingularMass)?;
    Ok(chol.solve(&rhs))
}

/// One classical Runge–Kutta step with both torques held constant.
pub fn step(
    model: &RobotModel,
    state: &JointState,
    tau_total: &DVector<f64>,
    tau_ext: &DVector<f64>,
    dt: f64,
) -> Result<JointState, DynamicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::TimeStep(dt));
    }
    let n = model.dof();
    check_len("q", n, state.q.len())?;
    let f = |q: &DVector<f64>, v: &DVector<f64>| forward_dynamics(model, q, v, tau_total, tau_ext);
    let (q0, v0) = (&state.q, &state.qdot);
    let a1 = f(q0, v0)?;
    let q2 = q0 + v0 * (0.5 * dt);
    let v2 = v0 + &a1 * (0.5 * dt);
    let a2 = f(&q2, &v2)?;
    let q3 = q0 + &v2 * (0.5 * dt);
    let v3 = v0 + &a2 * (0.5 * dt);
    let a3 = f(&q3, &v3)?;
    let q4 = q0 + &v3 * dt;
    let v4 = v0 + &a3 * dt;
    let a4 = f(&q4, &v4)?;
    let sixth = dt / 6.0;
    Ok(JointState {
        q: q0 + (v0 + &v2 * 2.0 + &v3 * 2.0 + &v4) * sixth,
        qdot: v0 + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * sixth,
        t: state.t + dt,
    })
}
