//! Dynamical-system motion generation for the circle task.
//!
//! The stored circle of radius `radius_stored` is centred at the origin of its
//! own coordinates; it is scaled by `lambda = radius_desired / radius_stored`
//! in x and y and translated to `center`. The measured tool position is
//! pulled back into stored coordinates, written in polar form `(rho, delta)`,
//! and the field drives `rho` to the stored radius while `delta` advances at a
//! constant rate. Because the command is a function of the current position
//! only, a displaced tool is steered back to the circle from wherever it is.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::ControlError;

/// Below this polar radius (stored coordinates, m) the angle is undefined and
/// the previous angle is held.
pub const DEGENERATE_RHO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleTask {
    /// Desired centre `[a_d, b_d, z_target]`, base frame (m).
    pub center: Vector3<f64>,
    /// Radius of the stored path (m).
    pub radius_stored: f64,
    /// Radius actually traced (m).
    pub radius_desired: f64,
    /// Radial convergence gain (1/s).
    pub k_rho: f64,
    /// Angular speed along the circle (rad/s).
    pub delta_dot: f64,
    /// Height loop proportional gain (1/s).
    pub k_z_p: f64,
    /// Height loop derivative gain.
    pub k_z_d: f64,
}

impl Default for CircleTask {
    fn default() -> Self {
        CircleTask {
            center: Vector3::zeros(),
            radius_stored: 0.10,
            radius_desired: 0.10,
            k_rho: 2.0,
            delta_dot: 0.35,
            k_z_p: 5.0,
            k_z_d: 1.0,
        }
    }
}

impl CircleTask {
    /// Scaling factor `radius_desired / radius_stored`.
    pub fn lambda(&self) -> f64 {
        self.radius_desired / self.radius_stored
    }

    pub fn z_target(&self) -> f64 {
        self.center.z
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |msg: &str| Err(ControlError::Config(msg.to_string()));
        if !self.center.iter().all(|v| v.is_finite()) {
            return bad("task.center must be finite");
        }
        for (name, v) in [
            ("task.radius_stored", self.radius_stored),
            ("task.radius_desired", self.radius_desired),
            ("task.k_rho", self.k_rho),
            ("task.delta_dot", self.delta_dot),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ControlError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("task.k_z_p", self.k_z_p), ("task.k_z_d", self.k_z_d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ControlError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Measured position in stored polar coordinates, `(rho, delta)`.
    fn polar(&self, p: &Vector3<f64>) -> (f64, f64) {
        let lambda = self.lambda();
        let dx = (p.x - self.center.x) / lambda;
        let dy = (p.y - self.center.y) / lambda;
        (dx.hypot(dy), dy.atan2(dx))
    }
}

/// Desired position for the measured position `p`.
///
/// With the stored circle at its own origin this keeps the planar position
/// and replaces the height by the target height.
pub fn transform_target(task: &CircleTask, p: &Vector3<f64>) -> Vector3<f64> {
    let (rho, delta) = task.polar(p);
    let lambda = task.lambda();
    Vector3::new(
        lambda * rho * delta.cos() + task.center.x,
        lambda * rho * delta.sin() + task.center.y,
        task.center.z,
    )
}

/// Desired velocity at position `p` with measured velocity `pdot`.
///
/// `held_delta` is used in place of the polar angle when the tool sits on the
/// centre. Returns the velocity and the angle that was used.
pub fn velocity_field(
    task: &CircleTask,
    p: &Vector3<f64>,
    pdot: &Vector3<f64>,
    held_delta: f64,
) -> (Vector3<f64>, f64) {
    let (rho, measured_delta) = task.polar(p);
    // the stored radius is the target of rho in stored coordinates; it maps
    // onto radius_desired in the base frame
    let rho_target = task.radius_stored;
    let (delta, rho_dot, tangential) = if rho < DEGENERATE_RHO {
        (held_delta, task.k_rho * rho_target, 0.0)
    } else {
        (measured_delta, task.k_rho * (rho_target - rho), rho * task.delta_dot)
    };
    let (s, c) = delta.sin_cos();
    let lambda = task.lambda();
    let vz = task.k_z_p * (task.z_target() - p.z) + task.k_z_d * (0.0 - pdot.z);
    let v = Vector3::new(
        lambda * (rho_dot * c - tangential * s),
        lambda * (rho_dot * s + tangential * c),
        vz,
    );
    (v, delta)
}

/// Velocity-tracking PD law: `k_p (v_d - v) + k_d (a_d - a)`.
pub fn pd_velocity_command(
    desired_velocity: &Vector3<f64>,
    desired_acceleration: &Vector3<f64>,
    pdot: &Vector3<f64>,
    pddot: &Vector3<f64>,
    k_p: f64,
    k_d: f64,
) -> Vector3<f64> {
    k_p * (desired_velocity - pdot) + k_d * (desired_acceleration - pddot)
}

/// Constant-speed reference on the desired circle at time `t`:
/// position and velocity. `phase` is the angle at `t = 0`.
pub fn nominal_circle(task: &CircleTask, t: f64, phase: f64) -> (Vector3<f64>, Vector3<f64>) {
    let angle = (phase + task.delta_dot * t).rem_euclid(2.0 * PI);
    let (s, c) = angle.sin_cos();
    let r = task.radius_desired;
    (
        task.center + Vector3::new(r * c, r * s, 0.0),
        Vector3::new(-r * task.delta_dot * s, r * task.delta_dot * c, 0.0),
    )
}

/// Backward difference followed by a single-pole low-pass.
#[derive(Debug, Clone)]
pub struct LowPassDifferentiator {
    dt: f64,
    alpha: f64,
    previous: Option<Vector3<f64>>,
    value: Vector3<f64>,
}

impl LowPassDifferentiator {
    pub fn new(dt: f64, cutoff_hz: f64) -> Result<Self, ControlError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ControlError::Config(format!("sample time must be > 0, got {dt}")));
        }
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0) {
            return Err(ControlError::Config(format!(
                "cutoff must be > 0, got {cutoff_hz}"
            )));
        }
        let tau = 1.0 / (2.0 * PI * cutoff_hz);
        Ok(LowPassDifferentiator {
            dt,
            alpha: dt / (dt + tau),
            previous: None,
            value: Vector3::zeros(),
        })
    }

    /// Feeds one sample and returns the filtered derivative. The first sample
    /// yields zero.
    pub fn update(&mut self, x: &Vector3<f64>) -> Vector3<f64> {
        if let Some(prev) = self.previous {
            let raw = (x - prev) / self.dt;
            self.value += self.alpha * (raw - self.value);
        }
        self.previous = Some(*x);
        self.value
    }

    pub fn value(&self) -> Vector3<f64> {
        self.value
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.value = Vector3::zeros();
    }
}

/// Desired position, velocity and acceleration for one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCommand {
    pub p_tilde_d: Vector3<f64>,
    pub p_tilde_d_dot: Vector3<f64>,
    pub p_tilde_d_ddot: Vector3<f64>,
}

/// Stateful wrapper around [`velocity_field`]: holds the last angle for the
/// degenerate centre case and differentiates the velocity command.
#[derive(Debug, Clone)]
pub struct MotionGenerator {
    task: CircleTask,
    delta: f64,
    accel: LowPassDifferentiator,
}

impl MotionGenerator {
    pub fn new(task: CircleTask, dt: f64, cutoff_hz: f64) -> Result<Self, ControlError> {
        task.validate()?;
        Ok(MotionGenerator {
            task,
            delta: 0.0,
            accel: LowPassDifferentiator::new(dt, cutoff_hz)?,
        })
    }

    pub fn task(&self) -> &CircleTask {
        &self.task
    }

    pub fn update(&mut self, p: &Vector3<f64>, pdot: &Vector3<f64>) -> MotionCommand {
        let (v, delta) = velocity_field(&self.task, p, pdot, self.delta);
        self.delta = delta;
        MotionCommand {
            p_tilde_d: transform_target(&self.task, p),
            p_tilde_d_dot: v,
            p_tilde_d_ddot: self.accel.update(&v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn task(center: Vector3<f64>, stored: f64, desired: f64) -> CircleTask {
        CircleTask {
            center,
            radius_stored: stored,
            radius_desired: desired,
            ..CircleTask::default()
        }
    }

    #[test]
    fn point_on_the_circle_is_a_fixed_point() {
        let t = task(Vector3::new(-0.55, 0.02, 0.14), 0.1, 0.1);
        let p = Vector3::new(-0.55 + 0.1, 0.02, 0.14);
        assert!((transform_target(&t, &p) - p).amax() < 1e-15);
        assert_eq!(t.lambda(), 1.0);
    }

    #[test]
    fn scaled_target_matches_hand_evaluation() {
        let center = Vector3::new(0.3, -0.2, 0.15);
        let t = task(center, 0.10, 0.05);
        let angle: f64 = 0.7;
        // 2 cm outside the desired circle, 1 cm above the plane
        let p = center + Vector3::new(0.07 * angle.cos(), 0.07 * angle.sin(), 0.01);
        // stored coordinates: rho = 0.07 / 0.5 = 0.14, delta = 0.7
        let (rho, delta) = (0.14, 0.7);
        let expected = Vector3::new(
            0.5 * rho * f64::cos(delta) + 0.3,
            0.5 * rho * f64::sin(delta) - 0.2,
            0.15,
        );
        assert!((transform_target(&t, &p) - expected).amax() < 1e-15);
    }

    #[test]
    fn converged_command_is_tangent() {
        let t = task(Vector3::new(0.1, 0.2, 0.3), 0.1, 0.1);
        let angle: f64 = 1.1;
        let p = t.center + 0.1 * Vector3::new(angle.cos(), angle.sin(), 0.0);
        let (v, _) = velocity_field(&t, &p, &Vector3::zeros(), 0.0);
        let radial = Vector3::new(angle.cos(), angle.sin(), 0.0);
        assert!(v.dot(&radial).abs() < 1e-15);
        assert!((v.norm() - 0.1 * 0.35).abs() < 1e-15);
        assert_eq!(v.z, 0.0);
    }

    #[test]
    fn radial_velocity_outside_the_circle() {
        let t = task(Vector3::zeros(), 0.1, 0.1);
        let p = Vector3::new(0.12, 0.0, 0.0);
        let (v, _) = velocity_field(&t, &p, &Vector3::zeros(), 0.0);
        assert!((v.x + 0.04).abs() < 1e-15);
        assert!((v.y - 0.12 * 0.35).abs() < 1e-15);
    }

    #[test]
    fn centre_holds_the_previous_angle() {
        let t = task(Vector3::zeros(), 0.1, 0.1);
        let held = 0.5_f64;
        let (v, delta) = velocity_field(&t, &Vector3::zeros(), &Vector3::zeros(), held);
        assert_eq!(delta, held);
        let expected = 2.0 * 0.1 * Vector3::new(held.cos(), held.sin(), 0.0);
        assert!((v - expected).amax() < 1e-15);
    }

    #[test]
    fn height_loop() {
        let t = task(Vector3::new(0.0, 0.0, 0.2), 0.1, 0.1);
        let p = Vector3::new(0.1, 0.0, 0.19);
        let (v, _) = velocity_field(&t, &p, &Vector3::new(0.0, 0.0, 0.02), 0.0);
        assert!((v.z - (5.0 * 0.01 - 0.02)).abs() < 1e-15);
    }

    #[test]
    fn pd_law_examples() {
        let z = Vector3::zeros();
        let v = Vector3::new(0.3, -0.1, 0.05);
        let a = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(pd_velocity_command(&v, &a, &v, &a, 2.0, 0.5), z);
        let cmd = pd_velocity_command(&Vector3::new(0.1, 0.0, 0.0), &z, &z, &z, 1.0, 0.0);
        assert_eq!(cmd, Vector3::new(0.1, 0.0, 0.0));
        let cmd = pd_velocity_command(
            &Vector3::new(0.1, -0.05, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &z,
            &z,
            2.0,
            0.1,
        );
        assert!((cmd - Vector3::new(0.3, -0.1, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn nominal_circle_is_on_the_circle() {
        let t = task(Vector3::new(0.5, 0.0, 0.1), 0.1, 0.08);
        for k in 0..20 {
            let (p, v) = nominal_circle(&t, k as f64 * 0.7, 0.3);
            assert!(((p - t.center).norm() - 0.08).abs() < 1e-14);
            assert!((v.norm() - 0.08 * 0.35).abs() < 1e-14);
            assert!(v.dot(&(p - t.center)).abs() < 1e-14);
        }
    }

    #[test]
    fn differentiator_tracks_a_ramp() {
        let dt = 0.005;
        let mut d = LowPassDifferentiator::new(dt, 20.0).unwrap();
        assert_eq!(d.update(&Vector3::zeros()), Vector3::zeros());
        let slope = Vector3::new(1.0, -2.0, 0.5);
        let mut last = Vector3::zeros();
        for k in 1..200 {
            last = d.update(&(slope * (k as f64 * dt)));
        }
        assert!((last - slope).amax() < 1e-9);
        assert!(LowPassDifferentiator::new(0.0, 20.0).is_err());
    }

    #[test]
    fn invalid_tasks_are_rejected() {
        for t in [
            CircleTask { radius_stored: 0.0, ..CircleTask::default() },
            CircleTask { radius_desired: -0.1, ..CircleTask::default() },
            CircleTask { k_rho: 0.0, ..CircleTask::default() },
            CircleTask { delta_dot: f64::NAN, ..CircleTask::default() },
            CircleTask { k_z_d: -1.0, ..CircleTask::default() },
        ] {
            assert!(t.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn identity_on_the_circle(angle in -PI..PI, cx in -1.0f64..1.0, cy in -1.0f64..1.0) {
            let t = task(Vector3::new(cx, cy, 0.2), 0.1, 0.1);
            let p = t.center + 0.1 * Vector3::new(angle.cos(), angle.sin(), 0.0);
            prop_assert!((transform_target(&t, &p) - p).amax() < 1e-14);
        }

        #[test]
        fn field_is_continuous_away_from_centre(
            x in -0.5f64..0.5, y in -0.5f64..0.5, z in -0.2f64..0.2,
            dx in -1.0f64..1.0, dy in -1.0f64..1.0,
        ) {
            let t = task(Vector3::zeros(), 0.1, 0.07);
            let p = Vector3::new(x, y, z);
            let r = p.xy().norm();
            prop_assume!(r > 1e-3);
            let h = 1e-7;
            let step = h * Vector3::new(dx, dy, 0.0);
            let (a, _) = velocity_field(&t, &p, &Vector3::zeros(), 0.0);
            let (b, _) = velocity_field(&t, &(p + step), &Vector3::zeros(), 0.0);
            // local Lipschitz bound: radial gain, the turning of the radial
            // direction (k_rho * radius / r) and the tangential rate
            let bound = t.k_rho * (1.0 + t.radius_desired / r) + 2.0 * t.delta_dot;
            prop_assert!((a - b).norm() <= 1.01 * bound * step.norm() + 1e-15);
        }
    }
}
