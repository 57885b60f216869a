use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::error::ModelError;

/// Default torque limit applied when a joint entry omits `torque_limit`.
pub const DEFAULT_TORQUE_LIMIT: f64 = 80.0;

/// Default velocity scale of the smoothed Coulomb term, rad/s.
pub const DEFAULT_COULOMB_VELOCITY_SCALE: f64 = 0.01;

/// One standard Denavit–Hartenberg row: `Rz(q + theta_offset) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFriction {
    /// N·m·s/rad
    pub viscous: f64,
    /// N·m
    pub coulomb: f64,
}

/// Kinematic, inertial and friction description of an n-joint revolute serial arm.
///
/// Link `i` (1-based) is rigidly attached to DH frame `i` and is moved by
/// joints `1..=i`. COMs and inertias are expressed in that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub dh_rows: Vec<DhRow>,
    pub link_masses: Vec<f64>,
    pub link_coms: Vec<Vector3<f64>>,
    /// About the link COM, link frame.
    pub link_inertias: Vec<Matrix3<f64>>,
    pub friction: Vec<JointFriction>,
    pub coulomb_velocity_scale: f64,
    pub joint_limits: Vec<(f64, f64)>,
    pub torque_limits: Vec<f64>,
    pub gravity: Vector3<f64>,
    /// Tool centre point in the last link frame.
    pub tool_offset: Vector3<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    dof: Option<usize>,
    gravity: [f64; 3],
    #[serde(default)]
    tool_offset: Option<[f64; 3]>,
    #[serde(default)]
    coulomb_velocity_scale: Option<f64>,
    joint: Vec<JointEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    a: f64,
    alpha: f64,
    d: f64,
    #[serde(default)]
    theta_offset: f64,
    limits: [f64; 2],
    mass: f64,
    com: [f64; 3],
    /// [ixx, iyy, izz, ixy, ixz, iyz]
    inertia: [f64; 6],
    #[serde(default)]
    viscous: f64,
    #[serde(default)]
    coulomb: f64,
    #[serde(default)]
    torque_limit: Option<f64>,
}

impl RobotModel {
    /// The shipped KUKA LWR IV+ model (`data/models/kuka_lwr4.toml`).
    pub fn kuka_lwr4() -> Self {
        Self::from_toml_str(include_str!("../../../data/models/kuka_lwr4.toml"))
            .expect("shipped model file is valid")
    }

    pub fn dof(&self) -> usize {
        self.dh_rows.len()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Parses and validates a model file.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = toml::from_str(text)?;
        if let Some(dof) = file.dof {
            if dof != file.joint.len() {
                return Err(ModelError::Invalid(format!(
                    "dof = {dof} but {} [[joint]] entries",
                    file.joint.len()
                )));
            }
        }
        let mut model = RobotModel {
            name: file.name.unwrap_or_else(|| "unnamed".to_string()),
            dh_rows: Vec::with_capacity(file.joint.len()),
            link_masses: Vec::new(),
            link_coms: Vec::new(),
            link_inertias: Vec::new(),
            friction: Vec::new(),
            coulomb_velocity_scale: file
                .coulomb_velocity_scale
                .unwrap_or(DEFAULT_COULOMB_VELOCITY_SCALE),
            joint_limits: Vec::new(),
            torque_limits: Vec::new(),
            gravity: Vector3::from(file.gravity),
            tool_offset: Vector3::from(file.tool_offset.unwrap_or([0.0; 3])),
        };
        for j in &file.joint {
            model.dh_rows.push(DhRow {
                a: j.a,
                alpha: j.alpha,
                d: j.d,
                theta_offset: j.theta_offset,
            });
            model.link_masses.push(j.mass);
            model.link_coms.push(Vector3::from(j.com));
            let [xx, yy, zz, xy, xz, yz] = j.inertia;
            model
                .link_inertias
                .push(Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz));
            model.friction.push(JointFriction {
                viscous: j.viscous,
                coulomb: j.coulomb,
            });
            model.joint_limits.push((j.limits[0], j.limits[1]));
            model
                .torque_limits
                .push(j.torque_limit.unwrap_or(DEFAULT_TORQUE_LIMIT));
        }
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural and physical invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.dof();
        let invalid = |msg: String| Err(ModelError::Invalid(msg));
        if n == 0 {
            return invalid("model has no joints".into());
        }
        let lens = [
            ("link_masses", self.link_masses.len()),
            ("link_coms", self.link_coms.len()),
            ("link_inertias", self.link_inertias.len()),
            ("friction", self.friction.len()),
            ("joint_limits", self.joint_limits.len()),
            ("torque_limits", self.torque_limits.len()),
        ];
        for (what, len) in lens {
            if len != n {
                return invalid(format!("{what} has {len} entries, expected {n}"));
            }
        }
        if !self.gravity.iter().all(|v| v.is_finite()) {
            return invalid("gravity must be finite".into());
        }
        if !self.tool_offset.iter().all(|v| v.is_finite()) {
            return invalid("tool_offset must be finite".into());
        }
        if !(self.coulomb_velocity_scale.is_finite() && self.coulomb_velocity_scale > 0.0) {
            return invalid("coulomb_velocity_scale must be positive".into());
        }
        for i in 0..n {
            let k = i + 1;
            let row = &self.dh_rows[i];
            if ![row.a, row.alpha, row.d, row.theta_offset]
                .iter()
                .all(|v| v.is_finite())
            {
                return invalid(format!("joint {k}: DH row must be finite"));
            }
            let m = self.link_masses[i];
            if !(m.is_finite() && m > 0.0) {
                return invalid(format!("joint {k}: mass must be positive, got {m}"));
            }
            if !self.link_coms[i].iter().all(|v| v.is_finite()) {
                return invalid(format!("joint {k}: com must be finite"));
            }
            let inertia = &self.link_inertias[i];
            if !inertia.iter().all(|v| v.is_finite()) {
                return invalid(format!("joint {k}: inertia must be finite"));
            }
            if (inertia - inertia.transpose()).abs().max() > 1e-12 {
                return invalid(format!("joint {k}: inertia must be symmetric"));
            }
            if inertia.cholesky().is_none() {
                return invalid(format!("joint {k}: inertia must be positive definite"));
            }
            let f = self.friction[i];
            if !(f.viscous.is_finite() && f.viscous >= 0.0) {
                return invalid(format!("joint {k}: viscous friction must be >= 0"));
            }
            if !(f.coulomb.is_finite() && f.coulomb >= 0.0) {
                return invalid(format!("joint {k}: coulomb friction must be >= 0"));
            }
            let (lo, hi) = self.joint_limits[i];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("joint {k}: limits need min < max, got [{lo}, {hi}]"));
            }
            let t = self.torque_limits[i];
            if !(t.is_finite() && t > 0.0) {
                return invalid(format!("joint {k}: torque_limit must be positive"));
            }
        }
        Ok(())
    }

    /// Joints whose value lies outside the configured limits (1-based).
    pub fn joints_outside_limits(&self, q: &[f64]) -> Vec<usize> {
        q.iter()
            .zip(&self.joint_limits)
            .enumerate()
            .filter(|(_, (v, (lo, hi)))| **v < *lo || **v > *hi)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.link_masses.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"
        gravity = [9.81, 0.0, 0.0]
        [[joint]]
        a = 0.0
        alpha = 0.0
        d = 0.0
        limits = [-3.0, 3.0]
        mass = 1.0
        com = [0.5, 0.0, 0.0]
        inertia = [1e-3, 1e-3, 1e-3, 0.0, 0.0, 0.0]
    "#;

    #[test]
    fn shipped_model_is_valid() {
        let m = RobotModel::kuka_lwr4();
        assert_eq!(m.dof(), 7);
        assert!(m.total_mass() > 10.0 && m.total_mass() < 20.0);
        assert_eq!(m.torque_limits[0], 80.0);
    }

    #[test]
    fn defaults_are_filled_in() {
        let m = RobotModel::from_toml_str(PENDULUM).unwrap();
        assert_eq!(m.dof(), 1);
        assert_eq!(m.torque_limits[0], DEFAULT_TORQUE_LIMIT);
        assert_eq!(m.coulomb_velocity_scale, DEFAULT_COULOMB_VELOCITY_SCALE);
        assert_eq!(m.friction[0].viscous, 0.0);
        assert_eq!(m.tool_offset, Vector3::zeros());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{PENDULUM}\nmas = 2.0\n");
        assert!(matches!(
            RobotModel::from_toml_str(&text),
            Err(ModelError::Parse(_))
        ));
    }

    #[test]
    fn dof_must_match_rows() {
        let text = format!("dof = 2\n{PENDULUM}");
        let err = RobotModel::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("dof = 2"), "{err}");
    }

    #[test]
    fn rejects_non_spd_inertia() {
        let text = PENDULUM.replace("[1e-3, 1e-3, 1e-3", "[1e-3, -1e-3, 1e-3");
        let err = RobotModel::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("positive definite"), "{err}");
    }

    #[test]
    fn rejects_bad_mass_limits_and_friction() {
        for (from, to, needle) in [
            ("mass = 1.0", "mass = 0.0", "mass"),
            ("limits = [-3.0, 3.0]", "limits = [3.0, -3.0]", "limits"),
            ("mass = 1.0", "mass = 1.0\nviscous = -0.1", "viscous"),
            ("mass = 1.0", "mass = 1.0\ncoulomb = -0.1", "coulomb"),
        ] {
            let err = RobotModel::from_toml_str(&PENDULUM.replace(from, to)).unwrap_err();
            assert!(err.to_string().contains(needle), "{needle}: {err}");
        }
    }

    #[test]
    fn reports_joints_outside_limits() {
        let m = RobotModel::kuka_lwr4();
        let mut q = vec![0.0; 7];
        assert!(m.joints_outside_limits(&q).is_empty());
        q[1] = 2.5;
        q[6] = -3.1;
        assert_eq!(m.joints_outside_limits(&q), vec![2, 7]);
    }
}
