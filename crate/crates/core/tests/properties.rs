use armctl::interaction::InteractionEvent;
use armctl::log::{LogRow, TrajectoryLog};
use armctl::metrics::nmae;
use armctl::passivity::{audit, sample_storage, AuditConfig, StorageInputs, StorageSample};
use armctl_control::ControllerConfig;
use armctl_kinematics::nalgebra::{DMatrix, DVector, Matrix6xX, Vector3};
use armctl_kinematics::JacobianSet;
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-0.5f64..0.5, n),
        )
    })
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn nmae_ignores_scale_and_offset((desired, noise) in signal(), k in 0.01f64..100.0, c in -10.0f64..10.0) {
        let range = desired.iter().cloned().fold(f64::MIN, f64::max) - desired.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(range > 1e-3);
        let measured: Vec<f64> = desired.iter().zip(&noise).map(|(d, e)| d + e).collect();
        let base = nmae(&desired, &measured).unwrap();
        let d2: Vec<f64> = desired.iter().map(|v| k * v + c).collect();
        let m2: Vec<f64> = measured.iter().map(|v| k * v + c).collect();
        let scaled = nmae(&d2, &m2).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1.0));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn storage_is_never_negative(
        a in prop::collection::vec(-1.0f64..1.0, 49),
        jac in prop::collection::vec(-1.0f64..1.0, 42),
        qdot in prop::collection::vec(-2.0f64..2.0, 7),
        qdot_d in prop::collection::vec(-2.0f64..2.0, 7),
        e in prop::collection::vec(-1.0f64..1.0, 6),
        k_d in 0.0f64..2.0,
    ) {
        let a = DMatrix::from_vec(7, 7, a);
        let mass = a.transpose() * &a + DMatrix::identity(7, 7) * 0.01;
        let set = JacobianSet::new(Matrix6xX::from_vec(jac)).unwrap();
        let cfg = ControllerConfig { k_d, ..ControllerConfig::default() };
        let s = sample_storage(&cfg, &StorageInputs {
            mass: &mass,
            jacobians: &set,
            qdot: &DVector::from_vec(qdot),
            qdot_d: &DVector::from_vec(qdot_d),
            e_r: &Vector3::new(e[0], e[1], e[2]),
            e_p_dot: &Vector3::new(e[3], e[4], e[5]),
            tau_ext: &DVector::zeros(7),
            tau_friction: &DVector::zeros(7),
        });
        prop_assert!(s.s1 >= 0.0 && s.s2 >= 0.0 && s.s3 >= 0.0);
        prop_assert!(s.dissipation >= 0.0);
    }

    #[test]
    fn envelope_stays_in_unit_interval(t0 in 0.0f64..10.0, d in 0.01f64..5.0, ramp in 0.0f64..2.0, t in -1.0f64..20.0) {
        let mut e = InteractionEvent::body_push(t0, d, Vector3::y(), 1.0);
        e.ramp = ramp;
        let v = e.envelope(t);
        prop_assert!((0.0..=1.0).contains(&v));
        if !e.is_active(t) {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn passive_storage_passes_the_audit(power in prop::collection::vec(0.0f64..2.0, 50..300), leak in 0.0f64..0.5) {
        // S integrates the supply minus a dissipation, so S_dot <= supply
        let dt = 0.005;
        let t: Vec<f64> = (0..power.len()).map(|i| i as f64 * dt).collect();
        let supply = armctl::passivity::zero_phase_lowpass(&power, dt, 5.0);
        let mut s = vec![0.0; supply.len()];
        for i in 1..s.len() {
            s[i] = s[i - 1] + dt * 0.5 * (supply[i] + supply[i - 1]) * (1.0 - leak);
        }
        let r = audit(&t, &s, &supply, &AuditConfig::default()).unwrap();
        prop_assert!(r.passed, "{} violations, min margin {}", r.violations, r.min_margin);
    }

    #[test]
    fn log_rows_round_trip_bit_exact(values in prop::collection::vec(finite(), 120), event in -1i64..5) {
        let mut it = values.into_iter().cycle();
        let mut next = || it.next().unwrap();
        let dof = 2;
        let mut take = |n: usize| (0..n).map(|_| next()).collect::<Vec<f64>>();
        let v = take(60);
        let row = LogRow {
            t: v[0],
            q: v[1..3].to_vec(),
            qdot: v[3..5].to_vec(),
            tau_total: v[5..7].to_vec(),
            tau_c: v[7..9].to_vec(),
            tau_n: v[9..11].to_vec(),
            tau_ext: v[11..13].to_vec(),
            p: [v[13], v[14], v[15]],
            r: [v[16], v[17], v[18]],
            twist: [v[19], v[20], v[21], v[22], v[23], v[24]],
            p_tilde_d: [v[25], v[26], v[27]],
            p_tilde_d_dot: [v[28], v[29], v[30]],
            wrench: [v[31], v[32], v[33], v[34], v[35], v[36]],
            storage: StorageSample {
                s1: v[37], s2: v[38], s3: v[39], s: v[40], sdot: v[41], supply: v[42],
                margin: v[43], dissipation: v[44], friction_residual: v[45],
            },
            p_ref: [v[46], v[47], v[48]],
            qdot_d: v[49..51].to_vec(),
            tau_applied: v[51..53].to_vec(),
            event,
        };
        let log = TrajectoryLog { dof, meta: vec![("k".into(), "v".into())], rows: vec![row.clone(), row] };
        let back = TrajectoryLog::from_csv_str(&log.to_csv_string().unwrap()).unwrap();
        prop_assert_eq!(back, log);
    }
}
