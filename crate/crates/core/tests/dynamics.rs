use proptest::prelude::*;
use servo_sysid::actuator::{
    clamp_motor_torque, simulate_tracking_substeps, ControlCommand, ExternalTorque, JointState,
    STICTION_VELOCITY,
};
use servo_sysid::testbed::run_spindown;
use servo_sysid::*;

fn family() -> impl Strategy<Value = MotorFamily> {
    prop::sample::select(MotorFamily::ALL.to_vec())
}

fn max_abs_diff(a: &Trace, b: &Trace) -> f64 {
    a.rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| (x.q - y.q).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn torque_limit_is_even(fam in family(), qdot in -20.0..20.0f64) {
        let p = fam.params();
        prop_assert_eq!(torque_limit(qdot, &p), torque_limit(-qdot, &p));
    }

    #[test]
    fn torque_limit_continuous_below_qdot_max(fam in family(), s in 0.0..1.0f64) {
        let p = fam.params();
        let qdot = s * p.qdot_max;
        let eps = 1e-9;
        let hi = (qdot + eps).min(p.qdot_max);
        let lipschitz = (p.tau_max - p.tau_at_qdot_max) / (p.qdot_max - p.qdot_tau_max);
        let jump = (torque_limit(hi, &p) - torque_limit(qdot, &p)).abs();
        prop_assert!(jump <= lipschitz * eps * 1.000001 + 1e-15);
    }

    #[test]
    fn torque_limit_non_increasing(fam in family(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let p = fam.params();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(torque_limit(hi, &p) <= torque_limit(lo, &p));
    }

    #[test]
    fn net_torque_bounded(fam in family(), tau in -50.0..50.0f64, qdot in -20.0..20.0f64) {
        let p = fam.params();
        let motor_bound = p.tau_brake.max(p.tau_max);
        let clamped = clamp_motor_torque(tau, qdot, &p);
        prop_assert!(clamped.abs() <= motor_bound);
        let bound = motor_bound + resistance_torque(qdot, &p, false);
        prop_assert!(net_torque(tau, qdot, &p).abs() <= bound + 1e-12);
    }

    #[test]
    fn unpowered_energy_non_increasing(fam in family(), omega0 in 0.01..15.0f64) {
        let p = fam.params();
        let trace = run_spindown(&p, omega0, 1e-3).unwrap();
        prop_assert!(trace.reached_rest);
        for w in trace.omega_series.windows(2) {
            prop_assert!(w[1] * w[1] <= w[0] * w[0]);
            if w[0] != 0.0 {
                prop_assert!(w[1] * w[1] < w[0] * w[0]);
            }
        }
    }

    #[test]
    fn stiction_holds_below_friction(fam in family(), frac in -1.0..1.0f64, q in -1.0..1.0f64) {
        let p = fam.params();
        let load = LoadConfig {
            external_torque: ExternalTorque::Constant(frac * p.friction_loss),
            ..LoadConfig::free()
        };
        let s = step(&JointState::at_rest(q), &ControlCommand::unpowered(), &load, 1e-3, &p).unwrap();
        prop_assert_eq!(s.qdot, 0.0);
        prop_assert_eq!(s.q, q);
    }

    #[test]
    fn powered_hold_at_setpoint(fam in family(), q in -1.0..1.0f64, kp in 0.0..30.0f64) {
        let p = fam.params();
        let cmd = PdGains::physical(kp, 0.0).command(q);
        let s = step(&JointState::at_rest(q), &cmd, &LoadConfig::free(), 1e-3, &p).unwrap();
        prop_assert_eq!(s.q, q);
        prop_assert_eq!(s.qdot, 0.0);
    }
}

#[test]
fn one_step_breakaway_matches_hand_integration() {
    let p = MotorFamily::Xc330.params();
    let tau_e = 0.1;
    let load = LoadConfig {
        inertia: 0.001,
        external_torque: ExternalTorque::Constant(tau_e),
        ..LoadConfig::free()
    };
    let dt = 1e-3;
    let s = step(
        &JointState::at_rest(0.0),
        &ControlCommand::unpowered(),
        &load,
        dt,
        &p,
    )
    .unwrap();
    let expected = (tau_e - p.friction_loss) * dt / (p.armature + 0.001);
    assert!((s.qdot - expected).abs() < 1e-15);
}

#[test]
fn step_rejects_bad_inputs() {
    let p = MotorFamily::Xc330.params();
    let cmd = ControlCommand::unpowered();
    let s = JointState::at_rest(0.0);
    assert!(step(&s, &cmd, &LoadConfig::free(), 0.0, &p).is_err());
    assert!(step(&s, &cmd, &LoadConfig::free(), 3e-3, &p).is_err());
    let massless = ActuatorParams { armature: 0.0, ..p };
    assert!(step(&s, &cmd, &LoadConfig::free(), 1e-3, &massless).is_err());
    let nan = JointState { q: f64::NAN, ..s };
    assert!(step(&nan, &cmd, &LoadConfig::free(), 1e-3, &p).is_err());
}

#[test]
fn step_and_tenth_step_agree_over_one_second_chirp() {
    let spec = ChirpSpec {
        duration: 1.0,
        ..ChirpSpec::identification()
    };
    let setpoints = gen_chirp(&spec).unwrap();
    let gains = PdGains::physical(6.0, 0.0);
    for fam in MotorFamily::ALL {
        let p = fam.params();
        let coarse = simulate_tracking_substeps(&setpoints, gains, &LoadConfig::free(), &p, 1).unwrap();
        let fine = simulate_tracking_substeps(&setpoints, gains, &LoadConfig::free(), &p, 10).unwrap();
        let diff = max_abs_diff(&coarse, &fine);
        assert!(diff <= 1e-3, "{fam}: {diff:e} rad");
    }
}

#[test]
fn constant_setpoint_stays_put() {
    let p = MotorFamily::Xc330.params();
    let setpoints = SetpointSeries::constant(0.2, 1e-3, 500);
    let trace = simulate_tracking(&setpoints, PdGains::physical(6.0, 0.0), &LoadConfig::free(), &p).unwrap();
    for r in &trace.rows {
        assert!((r.q - 0.2).abs() <= STICTION_VELOCITY * 1e-3);
    }
}

#[test]
fn step_response_matches_dense_oracle() {
    let target = 0.3;
    let values = std::iter::once(0.0)
        .chain(std::iter::repeat_n(target, 2000))
        .collect();
    let setpoints = SetpointSeries { dt: 1e-3, values };
    let p = MotorFamily::Xc330.params();
    // Damping ratio above one for the linear part of the loop.
    let gains = PdGains::physical(20.0, 0.3);
    let zeta = (p.kd_min + gains.kd) / (2.0 * (gains.kp * p.armature).sqrt());
    assert!(zeta > 1.0);
    let trace = simulate_tracking(&setpoints, gains, &LoadConfig::free(), &p).unwrap();
    let dense = simulate_tracking_substeps(&setpoints, gains, &LoadConfig::free(), &p, 100).unwrap();
    assert!(max_abs_diff(&trace, &dense) < 1e-3);

    let errors: Vec<f64> = trace.rows.iter().map(|r| r.q - target).collect();
    let crossings = errors.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    assert!(crossings <= 1, "{crossings} crossings");
    let first = errors.iter().position(|e| *e >= 0.0).unwrap_or(errors.len() - 1);
    let peak = first
        + errors[first..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i);
    for w in errors[peak..].windows(2) {
        assert!(w[1].abs() <= w[0].abs() + 1e-12);
    }
    let settle = p.friction_loss / gains.kp;
    assert!(errors.last().unwrap().abs() <= settle + 1e-9);
}

#[test]
fn chirp_lag_grows_with_frequency() {
    let spec = ChirpSpec::identification();
    let setpoints = gen_chirp(&spec).unwrap();
    let gains = PdGains::physical(6.0, 0.0);
    let p = MotorFamily::Xc330.params();
    let trace = simulate_tracking(&setpoints, gains, &LoadConfig::free(), &p).unwrap();
    let dense = simulate_tracking_substeps(&setpoints, gains, &LoadConfig::free(), &p, 100).unwrap();
    assert!(max_abs_diff(&trace, &dense) < 2e-3);

    let window_rms = |t: &Trace| -> Vec<f64> {
        t.rows[1..]
            .chunks(1000)
            .map(|c| (c.iter().map(|r| (r.setpoint - r.q).powi(2)).sum::<f64>() / c.len() as f64).sqrt())
            .collect()
    };
    for rms in [window_rms(&trace), window_rms(&dense)] {
        for w in rms.windows(2) {
            assert!(w[1] > w[0], "{rms:?}");
        }
    }
}

#[test]
fn tracking_is_bit_reproducible() {
    let setpoints = gen_chirp(&ChirpSpec::identification()).unwrap();
    let gains = PdGains::physical(6.0, 0.0);
    let p = MotorFamily::Xc430.params();
    let a = simulate_tracking(&setpoints, gains, &LoadConfig::free(), &p).unwrap();
    let b = simulate_tracking(&setpoints, gains, &LoadConfig::free(), &p).unwrap();
    assert_eq!(a, b);
}
