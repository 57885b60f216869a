//! Scenario files: model, task, gains, interaction script and run settings.
//!
//! The format is TOML with dotted keys for the nested groups:
//!
//! ```toml
//! name = "expC"
//! model_file = "../models/kuka_lwr4.toml"
//! duration = 90.0
//! task.radius_desired = 0.10
//! controller.variant = "proposed"
//!
//! [[event]]
//! kind = "body_push"
//! t_start = 32.0
//! duration = 2.0
//! direction = [0.0, 1.0, 0.0]
//! magnitude = 30.0
//! ```
//!
//! Every key is optional except where noted in the README; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use armctl_control::{CircleTask, ControllerConfig, Variant};
use armctl_kinematics::nalgebra::{DVector, Vector3};
use armctl_kinematics::{forward_kinematics, ModelError, RobotModel};
use serde::Deserialize;
use thiserror::Error;

use crate::interaction::{EventKind, InteractionEvent, PushProfile, DEFAULT_RAMP};
use crate::passivity::AuditConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

/// Default start configuration, tool pointing down.
pub fn default_initial_q() -> Vec<f64> {
    use std::f64::consts::PI;
    vec![0.0, 2.0 * PI / 9.0, 0.0, -PI / 2.0, 0.0, 5.0 * PI / 18.0, 0.0]
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TaskSection {
    center: Option<[f64; 3]>,
    radius_stored: Option<f64>,
    radius_desired: Option<f64>,
    k_rho: Option<f64>,
    delta_dot: Option<f64>,
    k_z_p: Option<f64>,
    k_z_d: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    variant: Option<String>,
    damping: Option<[f64; 3]>,
    k_omega: Option<[f64; 3]>,
    d_n: Option<f64>,
    alpha_f: Option<f64>,
    alpha_d: Option<f64>,
    k_p: Option<f64>,
    k_d: Option<f64>,
    k_c: Option<[f64; 3]>,
    d_c: Option<[f64; 3]>,
    r_d: Option<[f64; 3]>,
    saturate: Option<bool>,
    derivative_cutoff_hz: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MonitorSection {
    cutoff_hz: Option<f64>,
    relative_tolerance: Option<f64>,
    floor: Option<f64>,
    max_violation_fraction: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct JitterSection {
    timing: Option<f64>,
    magnitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventSection {
    kind: String,
    t_start: f64,
    duration: f64,
    link_index: Option<usize>,
    offset: Option<[f64; 3]>,
    direction: Option<[f64; 3]>,
    magnitude: Option<f64>,
    ramp: Option<f64>,
    profile: Option<String>,
    hand_stiffness: Option<f64>,
    travel: Option<f64>,
    grasp_stiffness: Option<f64>,
    grasp_damping: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    description: Option<String>,
    model_file: Option<String>,
    duration: f64,
    seed: Option<u64>,
    initial_q: Option<Vec<f64>>,
    control_rate: Option<f64>,
    physics_rate: Option<f64>,
    #[serde(default)]
    task: TaskSection,
    #[serde(default)]
    controller: ControllerSection,
    #[serde(default)]
    monitor: MonitorSection,
    #[serde(default)]
    jitter: JitterSection,
    #[serde(default)]
    event: Vec<EventSection>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub model: RobotModel,
    pub duration: f64,
    pub seed: u64,
    pub initial_q: DVector<f64>,
    /// Hz.
    pub control_rate: f64,
    /// Hz; an integer multiple of the control rate.
    pub physics_rate: f64,
    pub task: CircleTask,
    pub controller: ControllerConfig,
    /// Cut-off of the tool-acceleration estimate, Hz.
    pub derivative_cutoff_hz: f64,
    pub monitor: AuditConfig,
    pub events: Vec<InteractionEvent>,
    /// Uniform start-time jitter, s.
    pub jitter_timing: f64,
    /// Uniform relative magnitude jitter.
    pub jitter_magnitude: f64,
}

/// Circle through the tool position at `q`, starting on its +x side.
pub fn task_through_start(model: &RobotModel, q: &DVector<f64>, task: CircleTask) -> Result<CircleTask, ScenarioError> {
    let fk = forward_kinematics(model, q).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    Ok(CircleTask {
        center: fk.pose.position - Vector3::new(task.radius_desired, 0.0, 0.0),
        ..task
    })
}

impl Scenario {
    /// The shipped model, start pose and default gains with no events.
    pub fn with_defaults(name: &str, duration: f64) -> Scenario {
        let model = RobotModel::kuka_lwr4();
        let initial_q = DVector::from_vec(default_initial_q());
        let task = task_through_start(&model, &initial_q, CircleTask::default())
            .expect("shipped model and start pose are valid");
        Scenario {
            name: name.to_string(),
            description: String::new(),
            model,
            duration,
            seed: 0,
            initial_q,
            control_rate: 200.0,
            physics_rate: 1000.0,
            task,
            controller: ControllerConfig::default(),
            derivative_cutoff_hz: 20.0,
            monitor: AuditConfig::default(),
            events: Vec::new(),
            jitter_timing: 0.0,
            jitter_magnitude: 0.0,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    /// Parses a scenario. A relative `model_file` is resolved against
    /// `base_dir`; without one the shipped model is used.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let model = match &file.model_file {
            Some(rel) => {
                let mut path = PathBuf::from(rel);
                if path.is_relative() {
                    if let Some(base) = base_dir {
                        path = base.join(path);
                    }
                }
                RobotModel::from_file(path)?
            }
            None => RobotModel::kuka_lwr4(),
        };
        let n = model.dof();

        if !(file.duration.is_finite() && file.duration >= 0.0) {
            return invalid(format!("duration must be >= 0, got {}", file.duration));
        }
        let initial_q = file.initial_q.unwrap_or_else(default_initial_q);
        if initial_q.len() != n {
            return invalid(format!("initial_q has {} entries, model has {n} joints", initial_q.len()));
        }
        if !initial_q.iter().all(|v| v.is_finite()) {
            return invalid("initial_q must be finite");
        }
        let outside = model.joints_outside_limits(&initial_q);
        if !outside.is_empty() {
            let joints: Vec<String> = outside.iter().map(|j| (j + 1).to_string()).collect();
            return invalid(format!("initial_q outside joint limits at joint(s) {}", joints.join(", ")));
        }
        let initial_q = DVector::from_vec(initial_q);

        let control_rate = file.control_rate.unwrap_or(200.0);
        let physics_rate = file.physics_rate.unwrap_or(1000.0);
        if !(control_rate.is_finite() && control_rate > 0.0) {
            return invalid(format!("control_rate must be > 0, got {control_rate}"));
        }
        let ratio = physics_rate / control_rate;
        if !(ratio.is_finite() && ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return invalid(format!(
                "physics_rate ({physics_rate}) must be a whole multiple of control_rate ({control_rate})"
            ));
        }

        let t = &file.task;
        let defaults = CircleTask::default();
        let mut task = CircleTask {
            center: Vector3::zeros(),
            radius_stored: t.radius_stored.unwrap_or(defaults.radius_stored),
            radius_desired: t.radius_desired.unwrap_or(defaults.radius_desired),
            k_rho: t.k_rho.unwrap_or(defaults.k_rho),
            delta_dot: t.delta_dot.unwrap_or(defaults.delta_dot),
            k_z_p: t.k_z_p.unwrap_or(defaults.k_z_p),
            k_z_d: t.k_z_d.unwrap_or(defaults.k_z_d),
        };
        task = match t.center {
            Some(c) => CircleTask {
                center: Vector3::from(c),
                ..task
            },
            None => task_through_start(&model, &initial_q, task)?,
        };
        task.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let c = &file.controller;
        let d = ControllerConfig::default();
        let variant = match &c.variant {
            Some(v) => v.parse::<Variant>().map_err(|e| ScenarioError::Invalid(e.to_string()))?,
            None => d.variant,
        };
        let v3 = |v: Option<[f64; 3]>, default: Vector3<f64>| v.map(Vector3::from).unwrap_or(default);
        let controller = ControllerConfig {
            variant,
            damping: v3(c.damping, d.damping),
            k_omega: v3(c.k_omega, d.k_omega),
            d_n: c.d_n.unwrap_or(d.d_n),
            alpha_f: c.alpha_f.unwrap_or(d.alpha_f),
            alpha_d: c.alpha_d.unwrap_or(d.alpha_d),
            k_p: c.k_p.unwrap_or(d.k_p),
            k_d: c.k_d.unwrap_or(d.k_d),
            k_c: v3(c.k_c, d.k_c),
            d_c: v3(c.d_c, d.d_c),
            r_d: v3(c.r_d, d.r_d),
            saturate: c.saturate.unwrap_or(d.saturate),
        };
        controller.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let derivative_cutoff_hz = c.derivative_cutoff_hz.unwrap_or(20.0);
        if !(derivative_cutoff_hz.is_finite() && derivative_cutoff_hz > 0.0) {
            return invalid(format!("controller.derivative_cutoff_hz must be > 0, got {derivative_cutoff_hz}"));
        }

        let m = &file.monitor;
        let md = AuditConfig::default();
        let monitor = AuditConfig {
            cutoff_hz: m.cutoff_hz.unwrap_or(md.cutoff_hz),
            relative_tolerance: m.relative_tolerance.unwrap_or(md.relative_tolerance),
            floor: m.floor.unwrap_or(md.floor),
            max_violation_fraction: m.max_violation_fraction.unwrap_or(md.max_violation_fraction),
        };
        for (name, v) in [
            ("monitor.cutoff_hz", monitor.cutoff_hz),
            ("monitor.relative_tolerance", monitor.relative_tolerance),
            ("monitor.floor", monitor.floor),
            ("monitor.max_violation_fraction", monitor.max_violation_fraction),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be >= 0, got {v}"));
            }
        }
        if monitor.cutoff_hz <= 0.0 {
            return invalid("monitor.cutoff_hz must be > 0");
        }

        let mut events = Vec::with_capacity(file.event.len());
        for (i, e) in file.event.iter().enumerate() {
            events.push(event_from(i, e)?);
        }
        crate::interaction::Schedule::new(events.clone(), n).map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let jitter_timing = file.jitter.timing.unwrap_or(0.0);
        let jitter_magnitude = file.jitter.magnitude.unwrap_or(0.0);
        if !(jitter_timing.is_finite() && jitter_timing >= 0.0) {
            return invalid("jitter.timing must be >= 0");
        }
        if !(jitter_magnitude.is_finite() && (0.0..1.0).contains(&jitter_magnitude)) {
            return invalid("jitter.magnitude must be in [0, 1)");
        }

        Ok(Scenario {
            name: file.name.unwrap_or_else(|| "scenario".to_string()),
            description: file.description.unwrap_or_default(),
            model,
            duration: file.duration,
            seed: file.seed.unwrap_or(0),
            initial_q,
            control_rate,
            physics_rate,
            task,
            controller,
            derivative_cutoff_hz,
            monitor,
            events,
            jitter_timing,
            jitter_magnitude,
        })
    }

    pub fn with_variant(&self, variant: Variant) -> Scenario {
        let mut s = self.clone();
        s.controller.variant = variant;
        s
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn substeps(&self) -> usize {
        (self.physics_rate / self.control_rate).round() as usize
    }

    /// Number of control ticks after the initial one.
    pub fn ticks(&self) -> usize {
        (self.duration * self.control_rate).round() as usize
    }
}

fn event_from(index: usize, e: &EventSection) -> Result<InteractionEvent, ScenarioError> {
    let kind: EventKind = e
        .kind
        .parse()
        .map_err(|m: String| ScenarioError::Invalid(format!("event {index}: {m}")))?;
    let base = match kind {
        EventKind::EeHold => InteractionEvent::ee_hold(e.t_start, e.duration),
        EventKind::BodyPush => InteractionEvent::body_push(e.t_start, e.duration, Vector3::y(), 0.0),
    };
    let profile = match &e.profile {
        Some(p) => p
            .parse::<PushProfile>()
            .map_err(|m| ScenarioError::Invalid(format!("event {index}: {m}")))?,
        None => PushProfile::Force,
    };
    Ok(InteractionEvent {
        link_index: e.link_index.unwrap_or(base.link_index),
        offset: e.offset.map(Vector3::from).unwrap_or(base.offset),
        direction: e.direction.map(Vector3::from).unwrap_or(base.direction),
        magnitude: e.magnitude.unwrap_or(base.magnitude),
        ramp: e.ramp.unwrap_or(DEFAULT_RAMP),
        profile,
        hand_stiffness: e.hand_stiffness.unwrap_or(base.hand_stiffness),
        travel: e.travel.unwrap_or(base.travel),
        grasp_stiffness: e.grasp_stiffness.unwrap_or(base.grasp_stiffness),
        grasp_damping: e.grasp_damping.unwrap_or(base.grasp_damping),
        ..base
    })
}
