//! Fixed-axis roll–pitch–yaw orientation, `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
//!
//! Orientation vectors are `[roll, pitch, yaw]` with every component in
//! `(-pi, pi]`. With this convention `[pi, 0, pi]` is the tool pointing
//! straight down with its x axis along `-x` of the base.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::KinematicsError;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn rotation_from_rpy(r: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = r.x.sin_cos();
    let (sp, cp) = r.y.sin_cos();
    let (sy, cy) = r.z.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

pub fn rpy_from_rotation(rot: &Matrix3<f64>) -> Vector3<f64> {
    let pitch = (-rot[(2, 0)]).atan2(rot[(0, 0)].hypot(rot[(1, 0)]));
    let roll = rot[(2, 1)].atan2(rot[(2, 2)]);
    let yaw = rot[(1, 0)].atan2(rot[(0, 0)]);
    Vector3::new(wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw))
}

/// Smallest signed componentwise difference `r_d - r`, each in `(-pi, pi]`.
pub fn euler_error(r_d: &Vector3<f64>, r: &Vector3<f64>) -> Vector3<f64> {
    (r_d - r).map(wrap_angle)
}

/// Maps Euler rates to base-frame angular velocity: `omega = E(r) * r_dot`.
pub fn euler_rate_map(r: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = r.y.sin_cos();
    let (sy, cy) = r.z.sin_cos();
    Matrix3::new(cy * cp, -sy, 0.0, sy * cp, cy, 0.0, -sp, 0.0, 1.0)
}

/// Inverse of [`euler_rate_map`]; fails near pitch = ±pi/2.
pub(crate) fn euler_rate_map_inverse(r: &Vector3<f64>) -> Result<Matrix3<f64>, KinematicsError> {
    let (sp, cp) = r.y.sin_cos();
    if cp.abs() < 1e-9 {
        return Err(KinematicsError::GimbalLock { pitch: r.y });
    }
    let (sy, cy) = r.z.sin_cos();
    Ok(Matrix3::new(
        cy / cp,
        sy / cp,
        0.0,
        -sy,
        cy,
        0.0,
        cy * sp / cp,
        sy * sp / cp,
        1.0,
    ))
}
