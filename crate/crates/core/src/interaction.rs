//! Scripted external loads: a hand holding the tool and pushes on the arm body.
//!
//! Loads are forces at a contact point mapped to joint torques through the
//! contact Jacobian. They are only ever handed to the plant, never to a
//! controller.

use std::fmt;
use std::str::FromStr;

use armctl_kinematics::nalgebra::{DVector, Vector3, Vector6};
use armctl_kinematics::{contact_jacobian, contact_point, KinematicsError, RobotModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default rise and fall time of a push, s.
pub const DEFAULT_RAMP: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("event {index}: {message}")]
    Invalid { index: usize, message: String },
    #[error("events {first} and {second} act on the same contact point at overlapping times")]
    Overlap { first: usize, second: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A hand grabs the tool and holds it near where it was caught.
    EeHold,
    /// A push on the arm body.
    BodyPush,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::EeHold => "ee_hold",
            EventKind::BodyPush => "body_push",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ee_hold" => Ok(EventKind::EeHold),
            "body_push" => Ok(EventKind::BodyPush),
            other => Err(format!("unknown event kind {other:?} (expected ee_hold or body_push)")),
        }
    }
}

/// How a body push sets its force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushProfile {
    /// Prescribed trapezoid: `magnitude * envelope(t)` regardless of motion.
    Force,
    /// A compliant hand whose anchor advances `travel * envelope(t)` along
    /// the push direction. The force is the hand spring's, capped at the
    /// trapezoid, so an arm that yields is pushed less hard.
    Hand,
}

impl FromStr for PushProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "force" => Ok(PushProfile::Force),
            "hand" => Ok(PushProfile::Hand),
            other => Err(format!("unknown push profile {other:?} (expected force or hand)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub kind: EventKind,
    pub t_start: f64,
    pub duration: f64,
    /// Contact link, 1-based. Ignored for holds, which act on the tool.
    pub link_index: usize,
    /// Contact point in the link frame.
    pub offset: Vector3<f64>,
    /// Unit push direction, base frame.
    pub direction: Vector3<f64>,
    /// Peak push force, N.
    pub magnitude: f64,
    /// Rise and fall time of the push envelope, s.
    pub ramp: f64,
    pub profile: PushProfile,
    /// Hand spring for `PushProfile::Hand`, N/m.
    pub hand_stiffness: f64,
    /// Anchor travel for `PushProfile::Hand`, m.
    pub travel: f64,
    /// Hold spring, N/m.
    pub grasp_stiffness: f64,
    /// Hold damper, N·s/m.
    pub grasp_damping: f64,
}

impl InteractionEvent {
    pub fn ee_hold(t_start: f64, duration: f64) -> Self {
        InteractionEvent {
            kind: EventKind::EeHold,
            t_start,
            duration,
            link_index: 0,
            offset: Vector3::zeros(),
            direction: Vector3::x(),
            magnitude: 0.0,
            ramp: DEFAULT_RAMP,
            profile: PushProfile::Force,
            hand_stiffness: 0.0,
            travel: 0.0,
            grasp_stiffness: 400.0,
            grasp_damping: 40.0,
        }
    }

    /// Push at the joint-4 frame origin.
    pub fn body_push(t_start: f64, duration: f64, direction: Vector3<f64>, magnitude: f64) -> Self {
        InteractionEvent {
            kind: EventKind::BodyPush,
            t_start,
            duration,
            link_index: 4,
            offset: Vector3::zeros(),
            direction,
            magnitude,
            ramp: DEFAULT_RAMP,
            profile: PushProfile::Force,
            hand_stiffness: 0.0,
            travel: 0.0,
            grasp_stiffness: 0.0,
            grasp_damping: 0.0,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Half-open window `[t_start, t_start + duration)`.
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end()
    }

    /// Trapezoid in `[0, 1]`; the ramps shrink to half the window if needed.
    pub fn envelope(&self, t: f64) -> f64 {
        if !self.is_active(t) {
            return 0.0;
        }
        let ramp = self.ramp.min(0.5 * self.duration);
        if ramp <= 0.0 {
            return 1.0;
        }
        let since = t - self.t_start;
        let until = self.t_end() - t;
        (since / ramp).min(until / ramp).min(1.0)
    }

    fn contact_key(&self, dof: usize) -> (usize, [u64; 3]) {
        let link = match self.kind {
            EventKind::EeHold => dof + 1,
            EventKind::BodyPush => self.link_index,
        };
        (link, [self.offset.x.to_bits(), self.offset.y.to_bits(), self.offset.z.to_bits()])
    }

    pub fn validate(&self, index: usize, dof: usize) -> Result<(), InteractionError> {
        let bad = |message: String| Err(InteractionError::Invalid { index, message });
        if !(self.t_start.is_finite() && self.t_start >= 0.0) {
            return bad(format!("t_start must be >= 0, got {}", self.t_start));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        for (name, v) in [
            ("magnitude", self.magnitude),
            ("ramp", self.ramp),
            ("hand_stiffness", self.hand_stiffness),
            ("travel", self.travel),
            ("grasp_stiffness", self.grasp_stiffness),
            ("grasp_damping", self.grasp_damping),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.kind == EventKind::BodyPush {
            if self.link_index == 0 || self.link_index > dof {
                return bad(format!("link_index must be in 1..={dof}, got {}", self.link_index));
            }
            if (self.direction.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("direction must be a unit vector, norm {}", self.direction.norm()));
            }
            if !self.offset.iter().all(|v| v.is_finite()) {
                return bad("offset must be finite".into());
            }
        }
        Ok(())
    }
}

/// A force at a contact point and the joint torque it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalLoad {
    /// `[force; moment]` at the contact point, base frame.
    pub wrench: Vector6<f64>,
    pub tau_ext: DVector<f64>,
}

impl ExternalLoad {
    pub fn zero(dof: usize) -> Self {
        ExternalLoad {
            wrench: Vector6::zeros(),
            tau_ext: DVector::zeros(dof),
        }
    }

    pub fn force(&self) -> Vector3<f64> {
        self.wrench.fixed_rows::<3>(0).into_owned()
    }
}

fn load_from_force(
    model: &RobotModel,
    q: &DVector<f64>,
    link: usize,
    offset: &Vector3<f64>,
    force: Vector3<f64>,
) -> Result<ExternalLoad, InteractionError> {
    let jac = contact_jacobian(model, q, link, offset)?;
    let wrench = Vector6::new(force.x, force.y, force.z, 0.0, 0.0, 0.0);
    Ok(ExternalLoad {
        wrench,
        tau_ext: jac.tr_mul(&wrench),
    })
}

/// Spring-damper pulling the tool toward the latched grasp point.
pub fn ee_hold_load(
    event: &InteractionEvent,
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    grasp: &Vector3<f64>,
    t: f64,
) -> Result<ExternalLoad, InteractionError> {
    let n = model.dof();
    if !event.is_active(t) {
        return Ok(ExternalLoad::zero(n));
    }
    let jac = contact_jacobian(model, q, n, &model.tool_offset)?;
    let p = contact_point(model, q, n, &model.tool_offset)?;
    let v = jac.fixed_rows::<3>(0) * qdot;
    let force = event.grasp_stiffness * (grasp - p) - event.grasp_damping * v;
    let wrench = Vector6::new(force.x, force.y, force.z, 0.0, 0.0, 0.0);
    Ok(ExternalLoad {
        wrench,
        tau_ext: jac.tr_mul(&wrench),
    })
}

/// Push force at the event's contact point. `start` is the contact point
/// latched at the first active tick; only the hand profile uses it.
pub fn body_push_load(
    event: &InteractionEvent,
    model: &RobotModel,
    q: &DVector<f64>,
    start: Option<&Vector3<f64>>,
    t: f64,
) -> Result<ExternalLoad, InteractionError> {
    let envelope = event.envelope(t);
    if envelope == 0.0 {
        return Ok(ExternalLoad::zero(model.dof()));
    }
    let cap = envelope * event.magnitude;
    let magnitude = match (event.profile, start) {
        (PushProfile::Hand, Some(start)) => {
            let here = contact_point(model, q, event.link_index, &event.offset)?;
            let yielded = (here - start).dot(&event.direction);
            let squeeze = event.travel * envelope - yielded;
            (event.hand_stiffness * squeeze).clamp(0.0, cap)
        }
        _ => cap,
    };
    load_from_force(model, q, event.link_index, &event.offset, event.direction * magnitude)
}

/// Combined load of all active events plus per-event forces for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutput {
    pub total: ExternalLoad,
    /// Index of the active event, if any (events never overlap in a valid
    /// schedule on the same point; with several active the first is reported).
    pub active: Option<usize>,
}

/// Ordered list of events with the latched state each one needs.
#[derive(Debug, Clone)]
pub struct Schedule {
    events: Vec<InteractionEvent>,
    latched: Vec<Option<Vector3<f64>>>,
}

impl Schedule {
    pub fn new(events: Vec<InteractionEvent>, dof: usize) -> Result<Self, InteractionError> {
        for (i, e) in events.iter().enumerate() {
            e.validate(i, dof)?;
        }
        for i in 0..events.len() {
            for j in i + 1..events.len() {
                let (a, b) = (&events[i], &events[j]);
                let same_point = a.contact_key(dof) == b.contact_key(dof);
                let overlap = a.t_start < b.t_end() && b.t_start < a.t_end();
                if same_point && overlap {
                    return Err(InteractionError::Overlap { first: i, second: j });
                }
            }
        }
        let latched = vec![None; events.len()];
        Ok(Schedule { events, latched })
    }

    /// Perturbs start times by up to `timing` seconds and magnitudes by up
    /// to the fraction `magnitude`, reproducibly from `seed`.
    pub fn with_jitter(
        mut events: Vec<InteractionEvent>,
        dof: usize,
        seed: u64,
        timing: f64,
        magnitude: f64,
    ) -> Result<Self, InteractionError> {
        if timing > 0.0 || magnitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for e in &mut events {
                if timing > 0.0 {
                    e.t_start = (e.t_start + rng.random_range(-timing..=timing)).max(0.0);
                }
                if magnitude > 0.0 {
                    let scale = 1.0 + rng.random_range(-magnitude..=magnitude);
                    e.magnitude *= scale;
                    e.grasp_stiffness *= scale;
                }
            }
        }
        Self::new(events, dof)
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sum of all active loads at time `t`. Grasp and contact points are
    /// latched on the first call inside each window.
    pub fn evaluate(
        &mut self,
        model: &RobotModel,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        t: f64,
    ) -> Result<ScheduleOutput, InteractionError> {
        let n = model.dof();
        let mut total = ExternalLoad::zero(n);
        let mut active = None;
        for (i, event) in self.events.iter().enumerate() {
            if !event.is_active(t) {
                self.latched[i] = None;
                continue;
            }
            active.get_or_insert(i);
            let load = match event.kind {
                EventKind::EeHold => {
                    let grasp = match self.latched[i] {
                        Some(p) => p,
                        None => {
                            let p = contact_point(model, q, n, &model.tool_offset)?;
                            self.latched[i] = Some(p);
                            p
                        }
                    };
                    ee_hold_load(event, model, q, qdot, &grasp, t)?
                }
                EventKind::BodyPush => {
                    if self.latched[i].is_none() {
                        self.latched[i] = Some(contact_point(model, q, event.link_index, &event.offset)?);
                    }
                    body_push_load(event, model, q, self.latched[i].as_ref(), t)?
                }
            };
            total.wrench += load.wrench;
            total.tau_ext += load.tau_ext;
        }
        Ok(ScheduleOutput { total, active })
    }
}
