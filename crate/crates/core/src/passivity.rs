//! Storage function and offline passivity audit.
//!
//! `S = ½ ė_qᵀ M ė_q + ½ e_rᵀ K_ω e_r + ½ k_d ė_pᵀ D ė_p` with
//! `ė_q = q̇_d − q̇`. The closed loop should satisfy `Ṡ ≤ −ė_qᵀ τ_ext`,
//! the supply from the environment.

use armctl_control::ControllerConfig;
use armctl_kinematics::nalgebra::{DMatrix, DVector, Vector3};
use armctl_kinematics::JacobianSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassivityError {
    #[error("log too short for an audit: {0} samples")]
    TooShort(usize),
    #[error("log is not uniformly sampled: step {index} is {step} s, expected {expected} s")]
    Gap { index: usize, step: f64, expected: f64 },
    #[error("series lengths differ: {0} and {1}")]
    Length(usize, usize),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
}

/// One tick of the storage bookkeeping. `sdot` and `margin` are filled in
/// by [`audit`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StorageSample {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s: f64,
    pub sdot: f64,
    /// `−ė_qᵀ τ_ext`, W.
    pub supply: f64,
    pub margin: f64,
    /// Null-space dissipation `(d_n α_f + α_d) ė_qᵀ N ė_q`, W.
    pub dissipation: f64,
    /// `−ė_qᵀ (τ_f − τ̂_f)`: power the plant friction `τ_f` feeds into `S`
    /// beyond the assumed `τ̂_f = −d_n α_f N q̇`, W.
    pub friction_residual: f64,
}

/// Everything the storage function needs at one tick.
pub struct StorageInputs<'a> {
    pub mass: &'a DMatrix<f64>,
    /// Task Jacobian with its null projector `N`.
    pub jacobians: &'a JacobianSet,
    pub qdot: &'a DVector<f64>,
    pub qdot_d: &'a DVector<f64>,
    pub e_r: &'a Vector3<f64>,
    /// `ṗ̃_d − ṗ`
    pub e_p_dot: &'a Vector3<f64>,
    pub tau_ext: &'a DVector<f64>,
    /// Plant friction torque, sign convention of the dynamics (opposes motion).
    pub tau_friction: &'a DVector<f64>,
}

pub fn sample_storage(cfg: &ControllerConfig, x: &StorageInputs<'_>) -> StorageSample {
    let e_q = x.qdot_d - x.qdot;
    let s1 = 0.5 * e_q.dot(&(x.mass * &e_q));
    let s2 = 0.5 * x.e_r.dot(&cfg.k_omega.component_mul(x.e_r));
    let s3 = 0.5 * cfg.k_d * x.e_p_dot.dot(&cfg.damping.component_mul(x.e_p_dot));
    let dissipation = (cfg.d_n * cfg.alpha_f + cfg.alpha_d) * x.jacobians.null_quadratic(&e_q);
    let assumed = -(cfg.d_n * cfg.alpha_f) * (&x.jacobians.null * x.qdot);
    let friction_residual = -e_q.dot(&(x.tau_friction - assumed));
    StorageSample {
        s1,
        s2,
        s3,
        s: s1 + s2 + s3,
        sdot: 0.0,
        supply: -e_q.dot(x.tau_ext),
        margin: 0.0,
        dissipation,
        friction_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    /// Zero-phase low-pass applied to `Ṡ` and the supply, Hz.
    pub cutoff_hz: f64,
    /// Tolerance as a fraction of the peak |supply|.
    pub relative_tolerance: f64,
    /// Absolute tolerance floor, W.
    pub floor: f64,
    /// Largest fraction of samples allowed beyond tolerance.
    pub max_violation_fraction: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            cutoff_hz: 20.0,
            relative_tolerance: 0.05,
            floor: 1e-3,
            max_violation_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Filtered `Ṡ`.
    pub sdot: Vec<f64>,
    /// Filtered `supply − Ṡ`; negative means energy appeared from nowhere.
    pub margin: Vec<f64>,
    pub tolerance: f64,
    pub violations: usize,
    pub violation_fraction: f64,
    pub min_margin: f64,
    /// `∫ supply dt`, J.
    pub supplied_energy: f64,
    /// `∫ supply dt − (S_end − S_0)`, J.
    pub dissipated_energy: f64,
    pub passed: bool,
}

/// Forward-backward single-pole low-pass.
pub fn zero_phase_lowpass(x: &[f64], dt: f64, cutoff_hz: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let a = dt / (dt + 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz));
    let mut y = x.to_vec();
    for pass in 0..2 {
        let mut acc = if pass == 0 { y[0] } else { y[y.len() - 1] };
        let mut apply = |v: &mut f64| {
            acc += a * (*v - acc);
            *v = acc;
        };
        if pass == 0 {
            y.iter_mut().for_each(&mut apply);
        } else {
            y.iter_mut().rev().for_each(&mut apply);
        }
    }
    y
}

/// Central differences, one-sided at the ends.
pub fn derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / dt,
            _ if i == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            _ => (x[i + 1] - x[i - 1]) / (2.0 * dt),
        })
        .collect()
}

fn uniform_step(t: &[f64]) -> Result<f64, PassivityError> {
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (i, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        if dt.is_nan() || dt <= 0.0 || (step - dt).abs() > 1e-6 * dt.max(1e-3) + 1e-9 {
            return Err(PassivityError::Gap {
                index: i + 1,
                step,
                expected: dt,
            });
        }
    }
    Ok(dt)
}

/// Differentiates `S`, compares against the supply and counts violations.
pub fn audit(t: &[f64], s: &[f64], supply: &[f64], cfg: &AuditConfig) -> Result<AuditReport, PassivityError> {
    if t.len() != s.len() {
        return Err(PassivityError::Length(t.len(), s.len()));
    }
    if t.len() != supply.len() {
        return Err(PassivityError::Length(t.len(), supply.len()));
    }
    if t.len() < 3 {
        return Err(PassivityError::TooShort(t.len()));
    }
    if let Some(i) = (0..t.len()).find(|&i| !(t[i].is_finite() && s[i].is_finite() && supply[i].is_finite())) {
        return Err(PassivityError::NonFinite(i));
    }
    let dt = uniform_step(t)?;
    let sdot = zero_phase_lowpass(&derivative(s, dt), dt, cfg.cutoff_hz);
    let supply_f = zero_phase_lowpass(supply, dt, cfg.cutoff_hz);
    let margin: Vec<f64> = supply_f.iter().zip(&sdot).map(|(w, d)| w - d).collect();
    let peak = supply.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = cfg.relative_tolerance * peak + cfg.floor;
    let violations = margin.iter().filter(|m| **m < -tolerance).count();
    let violation_fraction = violations as f64 / margin.len() as f64;
    // trapezoid rule
    let supplied_energy: f64 = supply.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
    Ok(AuditReport {
        min_margin: margin.iter().cloned().fold(f64::INFINITY, f64::min),
        dissipated_energy: supplied_energy - (s[s.len() - 1] - s[0]),
        passed: violation_fraction < cfg.max_violation_fraction,
        sdot,
        margin,
        tolerance,
        violations,
        violation_fraction,
        supplied_energy,
    })
}
