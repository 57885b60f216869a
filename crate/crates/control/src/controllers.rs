//! Torque-level control laws.
//!
//! The proposed law is
//!
//! ```text
//! tau_total = G + J_A^T [D p_c_dot; K_w e_r] + N (d_n alpha_f qd_dot + alpha_d (qd_dot - q_dot))
//! ```
//!
//! where `p_c_dot` is the velocity-tracking PD output, `e_r` the wrapped Euler
//! error and `qd_dot = J^+ [p_tilde_d_dot; 0]`. `J_A` is the Jacobian whose
//! rotational rows are Euler-angle rates, so the orientation term is a true
//! generalized force for the Euler error it acts on. The baseline drops the
//! null-space term; the classical comparator replaces the velocity-tracking
//! force by a stiffness/damping pair around a constant-speed reference.

use std::fmt;
use std::str::FromStr;

use armctl_kinematics::{euler_error, JacobianSet, Pose};
use nalgebra::{DMatrix, DVector, Matrix6xX, Vector3, Vector6};

use crate::error::ControlError;
use crate::motion_gen::{pd_velocity_command, MotionCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Proposed,
    /// Cartesian impedance without the null-space term.
    Baseline,
    Classical,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Proposed, Variant::Baseline, Variant::Classical];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::Baseline => "baseline",
            Variant::Classical => "classical",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "proposed" => Ok(Variant::Proposed),
            "baseline" | "baseline_no_nullspace" => Ok(Variant::Baseline),
            "classical" => Ok(Variant::Classical),
            other => Err(ControlError::Config(format!(
                "unknown controller variant {other:?} (expected proposed, baseline or classical)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub variant: Variant,
    /// Diagonal of the translational damping `D` (N·s/m).
    pub damping: Vector3<f64>,
    /// Diagonal of the orientation stiffness `K_w` (N·m/rad).
    pub k_omega: Vector3<f64>,
    /// Null-space damping scale (N·m·s/rad).
    pub d_n: f64,
    /// Friction feedforward gain.
    pub alpha_f: f64,
    /// Null-space damping gain.
    pub alpha_d: f64,
    /// Velocity-tracking proportional gain.
    pub k_p: f64,
    /// Velocity-tracking derivative gain (acts on the acceleration error).
    pub k_d: f64,
    /// Classical stiffness diagonal (N/m).
    pub k_c: Vector3<f64>,
    /// Classical damping diagonal (N·s/m).
    pub d_c: Vector3<f64>,
    /// Desired tool orientation, roll–pitch–yaw (rad).
    pub r_d: Vector3<f64>,
    /// Clamp the applied torque at the model's per-joint limits.
    pub saturate: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            variant: Variant::Proposed,
            damping: Vector3::new(40.0, 40.0, 10.0),
            k_omega: Vector3::new(15.0, 15.0, 15.0),
            d_n: 5.0,
            alpha_f: 1.0,
            alpha_d: 1.0,
            k_p: 1.0,
            k_d: 0.0,
            k_c: Vector3::new(30.0, 30.0, 30.0),
            d_c: Vector3::new(40.0, 40.0, 10.0),
            r_d: Vector3::new(std::f64::consts::PI, 0.0, std::f64::consts::PI),
            saturate: true,
        }
    }
}

impl ControllerConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ControllerConfig {
            variant,
            ..Self::default()
        }
    }

    /// Every gain must be finite and non-negative.
    pub fn validate(&self) -> Result<(), ControlError> {
        let vectors = [
            ("controller.damping", self.damping),
            ("controller.k_omega", self.k_omega),
            ("controller.k_c", self.k_c),
            ("controller.d_c", self.d_c),
        ];
        for (name, v) in vectors {
            if !v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                return Err(ControlError::Config(format!(
                    "{name} entries must be finite and >= 0"
                )));
            }
        }
        let scalars = [
            ("controller.d_n", self.d_n),
            ("controller.alpha_f", self.alpha_f),
            ("controller.alpha_d", self.alpha_d),
            ("controller.k_p", self.k_p),
            ("controller.k_d", self.k_d),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ControlError::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !self.r_d.iter().all(|x| x.is_finite()) {
            return Err(ControlError::Config("controller.r_d must be finite".into()));
        }
        Ok(())
    }
}

/// `[D p_c_dot; K_w euler_error(r_d, r)]`.
pub fn cartesian_force(
    cfg: &ControllerConfig,
    p_c_dot: &Vector3<f64>,
    r_d: &Vector3<f64>,
    r: &Vector3<f64>,
) -> Vector6<f64> {
    let fv = cfg.damping.component_mul(p_c_dot);
    let fw = cfg.k_omega.component_mul(&euler_error(r_d, r));
    Vector6::new(fv.x, fv.y, fv.z, fw.x, fw.y, fw.z)
}

/// `J^T F`.
pub fn cartesian_torque(jac: &Matrix6xX<f64>, force: &Vector6<f64>) -> DVector<f64> {
    jac.tr_mul(force)
}

/// `N d_n (alpha_f qd_dot + alpha_d / d_n (qd_dot - q_dot))`, evaluated without
/// dividing by `d_n`.
pub fn nullspace_torque(
    cfg: &ControllerConfig,
    null: &DMatrix<f64>,
    qdot_d: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>, ControlError> {
    let n = null.nrows();
    for (what, got) in [
        ("null projector columns", null.ncols()),
        ("qdot_d", qdot_d.len()),
        ("qdot", qdot.len()),
    ] {
        if got != n {
            return Err(ControlError::Dimension {
                what,
                expected: n,
                got,
            });
        }
    }
    let inner = qdot_d * (cfg.d_n * cfg.alpha_f) + (qdot_d - qdot) * cfg.alpha_d;
    Ok(null * inner)
}

/// Stiffness/damping impedance around the reference `(p_d, pdot_d)`, with the
/// same orientation stiffness as the proposed law.
#[allow(clippy::too_many_arguments)]
pub fn classical_torque(
    cfg: &ControllerConfig,
    jac: &Matrix6xX<f64>,
    p_d: &Vector3<f64>,
    p: &Vector3<f64>,
    pdot_d: &Vector3<f64>,
    pdot: &Vector3<f64>,
    r_d: &Vector3<f64>,
    r: &Vector3<f64>,
) -> DVector<f64> {
    cartesian_torque(jac, &classical_force(cfg, p_d, p, pdot_d, pdot, r_d, r))
}

fn classical_force(
    cfg: &ControllerConfig,
    p_d: &Vector3<f64>,
    p: &Vector3<f64>,
    pdot_d: &Vector3<f64>,
    pdot: &Vector3<f64>,
    r_d: &Vector3<f64>,
    r: &Vector3<f64>,
) -> Vector6<f64> {
    let fv = cfg.k_c.component_mul(&(p_d - p)) + cfg.d_c.component_mul(&(pdot_d - pdot));
    let fw = cfg.k_omega.component_mul(&euler_error(r_d, r));
    Vector6::new(fv.x, fv.y, fv.z, fw.x, fw.y, fw.z)
}

/// Clamps each torque component to `±limit`.
pub fn saturate(tau: &DVector<f64>, limits: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        tau.len(),
        tau.iter()
            .zip(limits)
            .map(|(t, lim)| t.clamp(-lim, *lim)),
    )
}

/// Everything one control tick may look at.
///
/// This is the complete list of controller inputs: joint measurements,
/// kinematic quantities derived from them, the motion command, and the
/// gravity vector. There is no field for the mass or Coriolis matrices or for
/// the external torque.
#[derive(Debug, Clone, Copy)]
pub struct TickInputs<'a> {
    pub q: &'a DVector<f64>,
    pub qdot: &'a DVector<f64>,
    /// Tool pose from forward kinematics.
    pub pose: &'a Pose,
    /// Jacobian with Euler-rate rotational rows.
    pub analytic_jacobian: &'a Matrix6xX<f64>,
    /// Geometric Jacobian, its pseudoinverse and null projector.
    pub jacobians: &'a JacobianSet,
    pub command: &'a MotionCommand,
    /// Estimated tool acceleration; only used when `k_d > 0`.
    pub pddot: &'a Vector3<f64>,
    /// Gravity compensation torque.
    pub gravity: &'a DVector<f64>,
    /// Constant-speed reference `(p_d, pdot_d)`; required by the classical variant.
    pub reference: Option<(Vector3<f64>, Vector3<f64>)>,
    /// Per-joint torque limits used when saturation is on.
    pub torque_limits: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau_c: DVector<f64>,
    pub tau_n: DVector<f64>,
    /// `[F_v; F_w]`.
    pub f_c: Vector6<f64>,
    /// `G + tau_c + tau_n`, before saturation.
    pub tau_total: DVector<f64>,
    /// What is actually sent to the joints.
    pub tau_applied: DVector<f64>,
    /// Measured tool velocity `J q_dot`.
    pub pdot: Vector3<f64>,
    /// Velocity-tracking output (zero for the classical variant).
    pub p_c_dot: Vector3<f64>,
    /// `J^+ [p_tilde_d_dot; 0]`.
    pub qdot_d: DVector<f64>,
}

/// Runs the full control pipeline for one tick.
pub fn compose(cfg: &ControllerConfig, inputs: &TickInputs<'_>) -> Result<ControlOutput, ControlError> {
    let n = inputs.q.len();
    for (what, got) in [
        ("qdot", inputs.qdot.len()),
        ("gravity", inputs.gravity.len()),
        ("analytic jacobian columns", inputs.analytic_jacobian.ncols()),
        ("jacobian columns", inputs.jacobians.dof()),
        ("torque limits", inputs.torque_limits.len()),
    ] {
        if got != n {
            return Err(ControlError::Dimension {
                what,
                expected: n,
                got,
            });
        }
    }
    let jac = &inputs.jacobians.jacobian;
    let pdot: Vector3<f64> = jac.fixed_rows::<3>(0) * inputs.qdot;
    let v_d = inputs.command.p_tilde_d_dot;
    let xdot_d = Vector6::new(v_d.x, v_d.y, v_d.z, 0.0, 0.0, 0.0);
    let qdot_d = &inputs.jacobians.pinv * xdot_d;
    let r = inputs.pose.orientation;

    let (f_c, p_c_dot, tau_n) = match cfg.variant {
        Variant::Proposed | Variant::Baseline => {
            let p_c_dot = pd_velocity_command(
                &v_d,
                &inputs.command.p_tilde_d_ddot,
                &pdot,
                inputs.pddot,
                cfg.k_p,
                cfg.k_d,
            );
            let f_c = cartesian_force(cfg, &p_c_dot, &cfg.r_d, &r);
            let tau_n = if cfg.variant == Variant::Proposed {
                nullspace_torque(cfg, &inputs.jacobians.null, &qdot_d, inputs.qdot)?
            } else {
                DVector::zeros(n)
            };
            (f_c, p_c_dot, tau_n)
        }
        Variant::Classical => {
            let (p_d, pdot_d) = inputs.reference.ok_or_else(|| {
                ControlError::Config("classical variant needs a reference trajectory".into())
            })?;
            let f_c = classical_force(
                cfg,
                &p_d,
                &inputs.pose.position,
                &pdot_d,
                &pdot,
                &cfg.r_d,
                &r,
            );
            (f_c, Vector3::zeros(), DVector::zeros(n))
        }
    };
    let tau_c = cartesian_torque(inputs.analytic_jacobian, &f_c);
    let tau_total = inputs.gravity + &tau_c + &tau_n;
    let tau_applied = if cfg.saturate {
        saturate(&tau_total, inputs.torque_limits)
    } else {
        tau_total.clone()
    };
    Ok(ControlOutput {
        tau_c,
        tau_n,
        f_c,
        tau_total,
        tau_applied,
        pdot,
        p_c_dot,
        qdot_d,
    })
}
