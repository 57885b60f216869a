use nalgebra::{DVector, Matrix3, Matrix6xX, Vector3};

use crate::error::KinematicsError;
use crate::model::{DhRow, RobotModel};
use crate::orientation::{euler_rate_map_inverse, rpy_from_rotation};

/// Rigid transform: `x_parent = rotation * x_child + origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rotation: Matrix3<f64>,
    pub origin: Vector3<f64>,
}

impl Frame {
    pub fn identity() -> Self {
        Frame {
            rotation: Matrix3::identity(),
            origin: Vector3::zeros(),
        }
    }

    pub fn compose(&self, child: &Frame) -> Frame {
        Frame {
            rotation: self.rotation * child.rotation,
            origin: self.origin + self.rotation * child.origin,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.origin + self.rotation * p
    }

    /// z axis of the frame, expressed in the parent.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    fn from_dh(row: &DhRow, q: f64) -> Frame {
        let (st, ct) = (q + row.theta_offset).sin_cos();
        let (sa, ca) = row.alpha.sin_cos();
        Frame {
            rotation: Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca),
            origin: Vector3::new(row.a * ct, row.a * st, row.d),
        }
    }
}

/// Cartesian pose: position in metres and fixed-axis roll–pitch–yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

/// All DH frames of the chain at one configuration.
///
/// `frames[0]` is the base and `frames[i]` the frame of link `i`; joint `i`
/// turns about the z axis of `frames[i - 1]`.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    pub frames: Vec<Frame>,
    pub tcp: Frame,
}

impl ChainFrames {
    pub fn dof(&self) -> usize {
        self.frames.len() - 1
    }

    /// Axis of joint `j` (1-based) in the base frame.
    pub fn joint_axis(&self, j: usize) -> Vector3<f64> {
        self.frames[j - 1].z_axis()
    }

    /// A point on the axis of joint `j` (1-based).
    pub fn joint_anchor(&self, j: usize) -> Vector3<f64> {
        self.frames[j - 1].origin
    }

    /// Geometric Jacobian of a point rigidly attached to link `link` (1-based).
    pub fn point_jacobian(&self, link: usize, point: &Vector3<f64>) -> Matrix6xX<f64> {
        let n = self.dof();
        let mut jac = Matrix6xX::zeros(n);
        for j in 1..=link {
            let z = self.joint_axis(j);
            let lin = z.cross(&(point - self.joint_anchor(j)));
            jac.fixed_view_mut::<3, 1>(0, j - 1).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j - 1).copy_from(&z);
        }
        jac
    }
}

#[derive(Debug, Clone)]
pub struct FkResult {
    pub pose: Pose,
    pub tcp_rotation: Matrix3<f64>,
    /// Origin of every link frame `1..=n`, base coordinates.
    pub link_origins: Vec<Vector3<f64>>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), KinematicsError> {
    if expected != got {
        return Err(KinematicsError::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub fn chain_frames(model: &RobotModel, q: &DVector<f64>) -> Result<ChainFrames, KinematicsError> {
    let n = model.dof();
    check_len("q", n, q.len())?;
    let outside = model.joints_outside_limits(q.as_slice());
    if !outside.is_empty() {
        log::debug!("joints {outside:?} outside their limits");
    }
    let mut frames = Vec::with_capacity(n + 1);
    frames.push(Frame::identity());
    for (row, &qi) in model.dh_rows.iter().zip(q.iter()) {
        let next = frames.last().unwrap().compose(&Frame::from_dh(row, qi));
        frames.push(next);
    }
    let last = frames[n];
    let tcp = Frame {
        rotation: last.rotation,
        origin: last.transform_point(&model.tool_offset),
    };
    Ok(ChainFrames { frames, tcp })
}

pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Result<FkResult, KinematicsError> {
    let chain = chain_frames(model, q)?;
    Ok(FkResult {
        pose: Pose {
            position: chain.tcp.origin,
            orientation: rpy_from_rotation(&chain.tcp.rotation),
        },
        tcp_rotation: chain.tcp.rotation,
        link_origins: chain.frames[1..].iter().map(|f| f.origin).collect(),
    })
}

/// Geometric Jacobian of the tool centre point: rows `[v; omega]`, base frame.
pub fn jacobian(model: &RobotModel, q: &DVector<f64>) -> Result<Matrix6xX<f64>, KinematicsError> {
    let chain = chain_frames(model, q)?;
    Ok(chain.point_jacobian(model.dof(), &chain.tcp.origin))
}

/// Position of a point given in the frame of link `link_index` (1-based).
pub fn contact_point(
    model: &RobotModel,
    q: &DVector<f64>,
    link_index: usize,
    offset: &Vector3<f64>,
) -> Result<Vector3<f64>, KinematicsError> {
    let n = model.dof();
    if link_index == 0 || link_index > n {
        return Err(KinematicsError::LinkIndex {
            index: link_index,
            dof: n,
        });
    }
    let chain = chain_frames(model, q)?;
    Ok(chain.frames[link_index].transform_point(offset))
}

/// Geometric Jacobian of a point on link `link_index` (1-based), `offset` in
/// that link's frame. Columns of joints beyond the link are zero.
pub fn contact_jacobian(
    model: &RobotModel,
    q: &DVector<f64>,
    link_index: usize,
    offset: &Vector3<f64>,
) -> Result<Matrix6xX<f64>, KinematicsError> {
    let n = model.dof();
    if link_index == 0 || link_index > n {
        return Err(KinematicsError::LinkIndex {
            index: link_index,
            dof: n,
        });
    }
    let chain = chain_frames(model, q)?;
    let point = chain.frames[link_index].transform_point(offset);
    Ok(chain.point_jacobian(link_index, &point))
}

/// Jacobian whose rotational rows are roll–pitch–yaw rates,
/// `[p_dot; r_dot] = J_A * q_dot`. Returned together with the TCP pose it
/// was evaluated at.
pub fn analytic_jacobian(
    model: &RobotModel,
    q: &DVector<f64>,
) -> Result<(Matrix6xX<f64>, Pose), KinematicsError> {
    let chain = chain_frames(model, q)?;
    let mut jac = chain.point_jacobian(model.dof(), &chain.tcp.origin);
    let pose = Pose {
        position: chain.tcp.origin,
        orientation: rpy_from_rotation(&chain.tcp.rotation),
    };
    let inv = euler_rate_map_inverse(&pose.orientation)?;
    let rot_rows = inv * jac.fixed_rows::<3>(3);
    jac.fixed_rows_mut::<3>(3).copy_from(&rot_rows);
    Ok((jac, pose))
}
