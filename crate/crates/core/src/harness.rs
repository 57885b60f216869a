//! Closed-loop simulation: 200 Hz control ticks over a 1 kHz plant.

use std::fmt::Write as _;

use armctl_control::{
    compose, nominal_circle, ControlError, LowPassDifferentiator, MotionGenerator, TickInputs, Variant,
};
use armctl_kinematics::nalgebra::{DVector, Vector3};
use armctl_kinematics::{analytic_jacobian, euler_error, jacobian, JacobianSet, KinematicsError};
use thiserror::Error;

use crate::dynamics::{friction_torque, gravity_torque, mass_matrix, step, DynamicsError, JointState};
use crate::interaction::{InteractionError, InteractionEvent, Schedule};
use crate::log::{LogRow, TrajectoryLog};
use crate::metrics::{interaction_stats, tracking_nmae, MetricsError, RunMetrics};
use crate::passivity::{audit, sample_storage, AuditReport, StorageInputs};
use crate::scenario::Scenario;

/// Joint speed above which a run is flagged in the log output, rad/s. Only a
/// non-finite state aborts a run.
pub const IMPLAUSIBLE_SPEED: f64 = 100.0;

/// Joints whose excursion is reported as the joint deviation (q3 and q5).
pub const DEVIATION_JOINTS: [usize; 2] = [2, 4];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("simulation diverged at tick {tick} (t = {t} s): {reason}")]
    Divergence { tick: usize, t: f64, reason: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    /// Events as actually applied, after any jitter.
    pub events: Vec<InteractionEvent>,
    /// `None` for logs too short to differentiate.
    pub audit: Option<AuditReport>,
    pub metrics: Result<RunMetrics, MetricsError>,
}

fn meta(scenario: &Scenario) -> Vec<(String, String)> {
    let c = scenario.task.center;
    vec![
        ("scenario".into(), scenario.name.clone()),
        ("variant".into(), scenario.controller.variant.name().into()),
        ("model".into(), scenario.model.name.clone()),
        ("seed".into(), scenario.seed.to_string()),
        ("duration".into(), format!("{:?}", scenario.duration)),
        ("control_rate".into(), format!("{:?}", scenario.control_rate)),
        ("physics_rate".into(), format!("{:?}", scenario.physics_rate)),
        ("task.center".into(), format!("{:?} {:?} {:?}", c.x, c.y, c.z)),
        ("task.radius_desired".into(), format!("{:?}", scenario.task.radius_desired)),
        ("events".into(), scenario.events.len().to_string()),
    ]
}

/// Simulates the scenario. Gains are used as given; validation happens when
/// a scenario file is parsed.
pub fn run(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    let model = &scenario.model;
    let cfg = &scenario.controller;
    let n = model.dof();
    let dt = scenario.control_dt();
    let substeps = scenario.substeps().max(1);
    let h = dt / substeps as f64;

    let mut schedule = Schedule::with_jitter(
        scenario.events.clone(),
        n,
        scenario.seed,
        scenario.jitter_timing,
        scenario.jitter_magnitude,
    )?;
    let mut generator = MotionGenerator::new(scenario.task, dt, scenario.derivative_cutoff_hz)?;
    let mut accel = LowPassDifferentiator::new(dt, scenario.derivative_cutoff_hz)?;
    let mut state = JointState::at_rest(scenario.initial_q.clone());

    // the classical reference starts at the tool's initial angle on the circle
    let (_, start_pose) = analytic_jacobian(model, &state.q)?;
    let offset = start_pose.position - scenario.task.center;
    let phase = offset.y.atan2(offset.x);

    let ticks = scenario.ticks();
    let mut warned = vec![false; n];
    let mut fast = false;
    let mut rows = Vec::with_capacity(ticks + 1);
    for k in 0..=ticks {
        let t = k as f64 * dt;
        state.t = t;
        for j in model.joints_outside_limits(state.q.as_slice()) {
            if !std::mem::replace(&mut warned[j - 1], true) {
                log::warn!("joint {j} left its limits at t = {t:.3} s");
            }
        }
        let (ja, pose) = analytic_jacobian(model, &state.q)?;
        let set = JacobianSet::new(jacobian(model, &state.q)?)?;
        let pdot: Vector3<f64> = set.jacobian.fixed_rows::<3>(0) * &state.qdot;
        let pddot = accel.update(&pdot);
        let command = generator.update(&pose.position, &pdot);
        let reference = (cfg.variant == Variant::Classical).then(|| nominal_circle(&scenario.task, t, phase));
        let gravity = gravity_torque(model, &state.q)?;
        let out = compose(
            cfg,
            &TickInputs {
                q: &state.q,
                qdot: &state.qdot,
                pose: &pose,
                analytic_jacobian: &ja,
                jacobians: &set,
                command: &command,
                pddot: &pddot,
                gravity: &gravity,
                reference,
                torque_limits: &model.torque_limits,
            },
        )?;

        // plant side: loads and the energy monitor
        let load = schedule.evaluate(model, &state.q, &state.qdot, t)?;
        let mass = mass_matrix(model, &state.q)?;
        let e_r = euler_error(&cfg.r_d, &pose.orientation);
        let e_p_dot = command.p_tilde_d_dot - pdot;
        let storage = sample_storage(
            cfg,
            &StorageInputs {
                mass: &mass,
                jacobians: &set,
                qdot: &state.qdot,
                qdot_d: &out.qdot_d,
                e_r: &e_r,
                e_p_dot: &e_p_dot,
                tau_ext: &load.total.tau_ext,
                tau_friction: &friction_torque(model, &state.qdot),
            },
        );
        let twist = &ja * &state.qdot;
        let v = |x: &DVector<f64>| x.iter().copied().collect::<Vec<f64>>();
        rows.push(LogRow {
            t,
            q: v(&state.q),
            qdot: v(&state.qdot),
            tau_total: v(&out.tau_total),
            tau_c: v(&out.tau_c),
            tau_n: v(&out.tau_n),
            tau_ext: v(&load.total.tau_ext),
            p: pose.position.into(),
            r: pose.orientation.into(),
            twist: std::array::from_fn(|i| twist[i]),
            p_tilde_d: command.p_tilde_d.into(),
            p_tilde_d_dot: command.p_tilde_d_dot.into(),
            wrench: load.total.wrench.into(),
            storage,
            p_ref: reference.map(|(p, _)| p.into()).unwrap_or([0.0; 3]),
            qdot_d: v(&out.qdot_d),
            tau_applied: v(&out.tau_applied),
            event: load.active.map(|i| i as i64).unwrap_or(-1),
        });
        if k == ticks {
            break;
        }

        let mut tau_ext = load.total.tau_ext;
        for s in 0..substeps {
            if s > 0 {
                let ts = t + s as f64 * h;
                tau_ext = schedule.evaluate(model, &state.q, &state.qdot, ts)?.total.tau_ext;
            }
            state = step(model, &state, &out.tau_applied, &tau_ext, h)?;
        }
        if !state.is_finite() {
            return Err(HarnessError::Divergence {
                tick: k + 1,
                t: t + dt,
                reason: "non-finite joint state".into(),
            });
        }
        let speed = state.qdot.amax();
        if speed > IMPLAUSIBLE_SPEED && !std::mem::replace(&mut fast, true) {
            log::warn!("joint speed {speed:.1} rad/s at t = {:.3} s", t + dt);
        }
    }

    let mut log = TrajectoryLog {
        dof: n,
        meta: meta(scenario),
        rows,
    };
    let events = schedule.events().to_vec();
    let audit = if log.rows.len() >= 3 {
        let t = log.column(|r| r.t);
        let s = log.column(|r| r.storage.s);
        let supply = log.column(|r| r.storage.supply);
        let report = audit(&t, &s, &supply, &scenario.monitor).expect("uniform, finite, equal-length series");
        for (row, (sdot, margin)) in log.rows.iter_mut().zip(report.sdot.iter().zip(&report.margin)) {
            row.storage.sdot = *sdot;
            row.storage.margin = *margin;
        }
        Some(report)
    } else {
        None
    };
    let metrics = run_metrics(scenario, &log, &events);
    Ok(RunOutput {
        log,
        events,
        audit,
        metrics,
    })
}

/// Start of the first event, or `None` without interaction.
pub fn first_event_start(events: &[InteractionEvent]) -> Option<f64> {
    events.iter().map(|e| e.t_start).min_by(f64::total_cmp)
}

/// Metrics of a finished run. Pre-interaction is everything before the
/// first event starts, post-interaction everything after.
pub fn run_metrics(
    scenario: &Scenario,
    log: &TrajectoryLog,
    events: &[InteractionEvent],
) -> Result<RunMetrics, MetricsError> {
    let t = log.column(|r| r.t);
    let p: Vec<Vector3<f64>> = log.rows.iter().map(|r| Vector3::from(r.p)).collect();
    let center = scenario.task.center;
    let radius = scenario.task.radius_desired;
    let split = first_event_start(events).unwrap_or(f64::INFINITY);
    let nmae_pre = tracking_nmae(&t, &p, &center, radius, (f64::NEG_INFINITY, split))?;
    let nmae_post = if split.is_finite() {
        Some(tracking_nmae(&t, &p, &center, radius, (split, f64::INFINITY))?)
    } else {
        None
    };
    let force = log.column(|r| r.force_norm());
    let q: Vec<Vec<f64>> = log.rows.iter().map(|r| r.q.clone()).collect();
    let stats = interaction_stats(&t, &force, &q, events, &DEVIATION_JOINTS)?;
    let pre = log.rows.iter().filter(|r| r.t < split);
    let r_d = scenario.controller.r_d;
    let (orientation_error_max_deg, z_deviation_max) = pre.fold((0.0f64, 0.0f64), |(o, z), r| {
        let e = euler_error(&r_d, &Vector3::from(r.r)).norm().to_degrees();
        (o.max(e), z.max((r.p[2] - scenario.task.z_target()).abs()))
    });
    Ok(RunMetrics {
        variant: scenario.controller.variant.name().to_string(),
        nmae_pre,
        nmae_post,
        max_force: stats.max_force,
        joint_deviation_deg: stats.joint_deviation_deg,
        orientation_error_max_deg,
        z_deviation_max,
    })
}

/// Human-readable run report.
pub fn summary(scenario: &Scenario, output: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario   {}", scenario.name);
    let _ = writeln!(s, "variant    {}", scenario.controller.variant);
    let _ = writeln!(s, "model      {}", scenario.model.name);
    let _ = writeln!(s, "duration   {} s, {} rows", scenario.duration, output.log.rows.len());
    let _ = writeln!(s);
    let _ = writeln!(s, "[tracking]");
    let _ = writeln!(s, "z NMAE is normalised by the circle diameter; x and y by their desired range");
    match &output.metrics {
        Ok(m) => {
            let _ = writeln!(s, "nmae_pre   x {:.3} %  y {:.3} %  z {:.3} %", m.nmae_pre[0], m.nmae_pre[1], m.nmae_pre[2]);
            if let Some(p) = m.nmae_post {
                let _ = writeln!(s, "nmae_post  x {:.3} %  y {:.3} %  z {:.3} %", p[0], p[1], p[2]);
            }
            let _ = writeln!(s, "orientation error max {:.3} deg", m.orientation_error_max_deg);
            let _ = writeln!(s, "height error max {:.4} m", m.z_deviation_max);
            if !m.max_force.is_empty() {
                let _ = writeln!(s);
                let _ = writeln!(s, "[interaction]");
                for (i, (f, e)) in m.max_force.iter().zip(&output.events).enumerate() {
                    let _ = writeln!(s, "event {} {} at {:.2} s: max force {:.3} N", i + 1, e.kind, e.t_start, f);
                }
                let _ = writeln!(s, "joint deviation (q3, q5) {:.3} deg", m.joint_deviation_deg);
            }
        }
        Err(e) => {
            let _ = writeln!(s, "unavailable: {e}");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[passivity]");
    match &output.audit {
        Some(a) => {
            let _ = writeln!(s, "tolerance           {:.6} W", a.tolerance);
            let _ = writeln!(s, "min margin          {:.6} W", a.min_margin);
            let _ = writeln!(s, "violations          {} ({:.3} %)", a.violations, 100.0 * a.violation_fraction);
            let _ = writeln!(s, "supplied energy     {:.6} J", a.supplied_energy);
            let _ = writeln!(s, "dissipated energy   {:.6} J", a.dissipated_energy);
            let _ = writeln!(s, "result              {}", if a.passed { "pass" } else { "VIOLATION" });
        }
        None => {
            let _ = writeln!(s, "log too short to audit");
        }
    }
    s
}
