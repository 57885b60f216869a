//! Kinematic layer of the `armctl` workspace.
//!
//! Holds the [`RobotModel`] (Denavit–Hartenberg chain plus inertial and
//! friction parameters), forward kinematics, geometric and Euler-rate
//! Jacobians, the damped pseudoinverse and the null-space projector.
//!
//! Every function here is a pure function of its arguments.

mod chain;
mod error;
mod linalg;
mod model;
mod orientation;

pub use chain::{
    analytic_jacobian, chain_frames, contact_jacobian, contact_point, forward_kinematics,
    jacobian, ChainFrames, FkResult, Frame, Pose,
};
pub use error::{KinematicsError, ModelError};
pub use linalg::{
    null_projector, pseudoinverse, smallest_singular_value, DampingPolicy, JacobianSet,
};
pub use model::{DhRow, JointFriction, RobotModel};
pub use orientation::{
    euler_error, euler_rate_map, rotation_from_rpy, rpy_from_rotation, wrap_angle,
};

/// Re-exported so downstream crates agree on the matrix types.
pub use nalgebra;
