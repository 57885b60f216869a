//! Control laws of the `armctl` workspace.
//!
//! [`motion_gen`] turns the measured tool position into a desired velocity
//! field whose limit cycle is the task circle. [`controllers`] maps that
//! command to joint torques with the modified Cartesian impedance law, the
//! null-space impedance term and a classical stiffness-based comparator.
//!
//! Nothing in this crate can see the mass matrix, the Coriolis matrix or the
//! external torque. The only dynamics quantity a controller accepts is the
//! gravity vector, passed in as a plain joint-space vector.

pub mod controllers;
mod error;
pub mod motion_gen;

pub use controllers::{
    cartesian_force, cartesian_torque, classical_torque, compose, nullspace_torque, saturate,
    ControlOutput, ControllerConfig, TickInputs, Variant,
};
pub use error::ControlError;
pub use motion_gen::{
    nominal_circle, pd_velocity_command, transform_target, velocity_field, CircleTask,
    LowPassDifferentiator, MotionCommand, MotionGenerator,
};
