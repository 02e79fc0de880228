//! Single-joint servo dynamics under a PD position loop.
//!
//! The motor torque from the PD law is clamped to a velocity-dependent
//! envelope: accelerating torque is bounded by [`torque_limit`], decelerating
//! torque by the constant `tau_brake`. Passive resistance (Coulomb plus
//! viscous) opposes motion, and a velocity deadband models stiction.

use crate::error::{Error, Result};
use crate::params::ActuatorParams;
use crate::trace::{SetpointSeries, Trace, TraceRow};

/// Speeds below this magnitude count as rest.
pub const STICTION_VELOCITY: f64 = 1e-4;

/// Default integration step, s.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest step [`step`] accepts, s.
pub const MAX_STEP: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub q: f64,
    pub qdot: f64,
    pub t: f64,
}

impl JointState {
    pub fn at_rest(q: f64) -> Self {
        JointState { q, qdot: 0.0, t: 0.0 }
    }

    pub fn is_moving(&self) -> bool {
        self.qdot.abs() >= STICTION_VELOCITY
    }
}

/// How the proportional gain in a command is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainUnits {
    /// N·m/rad, used as-is.
    #[default]
    Physical,
    /// Vendor register value; divided by `kp_conversion`.
    Unitless,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
    pub units: GainUnits,
}

impl PdGains {
    pub fn physical(kp: f64, kd: f64) -> Self {
        PdGains {
            kp,
            kd,
            units: GainUnits::Physical,
        }
    }

    pub fn command(self, setpoint: f64) -> ControlCommand {
        ControlCommand {
            setpoint,
            kp: self.kp,
            kd: self.kd,
            units: self.units,
            powered: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub setpoint: f64,
    pub kp: f64,
    pub kd: f64,
    pub units: GainUnits,
    pub powered: bool,
}

impl ControlCommand {
    pub fn unpowered() -> Self {
        ControlCommand {
            setpoint: 0.0,
            kp: 0.0,
            kd: 0.0,
            units: GainUnits::Physical,
            powered: false,
        }
    }

    /// Proportional gain in N·m/rad.
    pub fn physical_kp(&self, params: &ActuatorParams) -> f64 {
        match self.units {
            GainUnits::Physical => self.kp,
            GainUnits::Unitless => self.kp / params.kp_conversion,
        }
    }
}

/// Torque applied to the joint from outside the actuator.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExternalTorque {
    #[default]
    None,
    Constant(f64),
    /// Zero-order-hold samples starting at t = 0; the last value holds afterwards.
    Sampled {
        dt: f64,
        values: Vec<f64>,
    },
}

impl ExternalTorque {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ExternalTorque::None => 0.0,
            ExternalTorque::Constant(v) => *v,
            ExternalTorque::Sampled { dt, values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let idx = (t / dt).floor().max(0.0) as usize;
                values[idx.min(values.len() - 1)]
            }
        }
    }
}

/// Load attached to the joint output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadConfig {
    /// Additional inertia, kg·m².
    pub inertia: f64,
    pub external_torque: ExternalTorque,
    /// Amplitude of a pendulum-style term `amplitude * sin(q)`, N·m.
    pub gravity_torque_amplitude: f64,
}

impl LoadConfig {
    pub fn free() -> Self {
        LoadConfig::default()
    }

    pub fn with_inertia(inertia: f64) -> Self {
        LoadConfig {
            inertia,
            ..Default::default()
        }
    }

    pub fn torque(&self, t: f64, q: f64) -> f64 {
        let gravity = if self.gravity_torque_amplitude != 0.0 {
            self.gravity_torque_amplitude * q.sin()
        } else {
            0.0
        };
        self.external_torque.at(t) + gravity
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia >= 0.0 && self.inertia.is_finite()) {
            return Err(Error::invariant("inertia", "load inertia must be >= 0"));
        }
        Ok(())
    }
}

/// Unclamped PD motor torque. Zero when the motor is unpowered.
pub fn pd_torque(state: &JointState, cmd: &ControlCommand, params: &ActuatorParams) -> Result<f64> {
    if !(state.q.is_finite() && state.qdot.is_finite()) {
        return Err(Error::NonFinite("joint state"));
    }
    if !(cmd.setpoint.is_finite() && cmd.kp.is_finite() && cmd.kd.is_finite()) {
        return Err(Error::NonFinite("control command"));
    }
    Ok(raw_pd_torque(state, cmd, params))
}

#[inline]
fn raw_pd_torque(state: &JointState, cmd: &ControlCommand, params: &ActuatorParams) -> f64 {
    if !cmd.powered {
        return 0.0;
    }
    cmd.physical_kp(params) * (cmd.setpoint - state.q) - (params.kd_min + cmd.kd) * state.qdot
}

/// Accelerating-torque ceiling at joint speed `qdot`.
///
/// Flat at `tau_max` up to `qdot_tau_max`, linear down to `tau_at_qdot_max`
/// at `qdot_max`, and zero beyond.
#[inline]
pub fn torque_limit(qdot: f64, params: &ActuatorParams) -> f64 {
    let speed = qdot.abs();
    if speed <= params.qdot_tau_max {
        params.tau_max
    } else if speed <= params.qdot_max {
        let s = (speed - params.qdot_tau_max) / (params.qdot_max - params.qdot_tau_max);
        params.tau_max * (1.0 - s) + params.tau_at_qdot_max * s
    } else {
        0.0
    }
}

/// Derivative of [`torque_limit`] with respect to signed `qdot`.
fn limit_slope(qdot: f64, params: &ActuatorParams) -> f64 {
    let speed = qdot.abs();
    if speed > params.qdot_tau_max && speed <= params.qdot_max {
        qdot.signum() * (params.tau_at_qdot_max - params.tau_max) / (params.qdot_max - params.qdot_tau_max)
    } else {
        0.0
    }
}

/// Magnitude of passive resistance at speed `qdot`.
#[inline]
pub fn resistance_torque(qdot: f64, params: &ActuatorParams, backdriven: bool) -> f64 {
    let base = params.friction_loss + params.damping * qdot.abs();
    if backdriven {
        base * params.passive_active_ratio
    } else {
        base
    }
}

/// Clamp motor torque to the envelope for the current direction of motion.
#[inline]
pub fn clamp_motor_torque(tau_m: f64, qdot: f64, params: &ActuatorParams) -> f64 {
    let limit = torque_limit(qdot, params);
    if qdot.abs() < STICTION_VELOCITY {
        tau_m.clamp(-limit, limit)
    } else if qdot > 0.0 {
        tau_m.clamp(-params.tau_brake, limit)
    } else {
        tau_m.clamp(-limit, params.tau_brake)
    }
}

/// Joint torque from motor torque `tau_m`: clamped motor output minus
/// resistance opposing motion. At rest no resistance is applied; stiction is
/// handled by the integrator.
pub fn net_torque(tau_m: f64, qdot: f64, params: &ActuatorParams) -> f64 {
    joint_torque(tau_m, qdot, params, false)
}

pub fn joint_torque(tau_m: f64, qdot: f64, params: &ActuatorParams, backdriven: bool) -> f64 {
    let motor = clamp_motor_torque(tau_m, qdot, params);
    if qdot.abs() < STICTION_VELOCITY {
        motor
    } else {
        motor - qdot.signum() * resistance_torque(qdot, params, backdriven)
    }
}

/// Advance the joint by one step of length `dt`.
pub fn step(
    state: &JointState,
    cmd: &ControlCommand,
    load: &LoadConfig,
    dt: f64,
    params: &ActuatorParams,
) -> Result<JointState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::invariant(
            "dt",
            format!("step must be in (0, {MAX_STEP}], got {dt}"),
        ));
    }
    if !(params.armature + load.inertia > 0.0) {
        return Err(Error::invariant("inertia", "total inertia must be > 0"));
    }
    pd_torque(state, cmd, params)?;
    if !(load.torque(state.t, state.q).is_finite()) {
        return Err(Error::NonFinite("load torque"));
    }
    Ok(advance(state, cmd, load, dt, params))
}

#[inline]
fn advance(
    state: &JointState,
    cmd: &ControlCommand,
    load: &LoadConfig,
    dt: f64,
    params: &ActuatorParams,
) -> JointState {
    let inertia = params.armature + load.inertia;
    let qdot = state.qdot;
    let tau_motor = if cmd.powered {
        clamp_motor_torque(raw_pd_torque(state, cmd, params), qdot, params)
    } else {
        0.0
    };
    let tau_load = load.torque(state.t, state.q);
    let drive = tau_motor + tau_load;

    if !state.is_moving() {
        let qdot_next = if drive.abs() <= params.friction_loss {
            0.0
        } else {
            qdot + (drive - params.friction_loss * drive.signum()) / inertia * dt
        };
        return JointState {
            q: state.q + 0.5 * (qdot + qdot_next) * dt,
            qdot: qdot_next,
            t: state.t + dt,
        };
    }

    let backdriven = if cmd.powered {
        tau_motor * qdot < 0.0
    } else {
        tau_load * qdot > 0.0
    };
    let ratio = if backdriven {
        params.passive_active_ratio
    } else {
        1.0
    };
    let coulomb = qdot.signum() * params.friction_loss * ratio;
    let viscous = params.damping * ratio;
    let h = dt / inertia;

    // Trapezoidal rule on the linear part: stiffness and velocity terms act at
    // the step midpoint, so held setpoints are integrated to second order
    // without iteration.
    let kp = if cmd.powered { cmd.physical_kp(params) } else { 0.0 };
    let kd = if cmd.powered { params.kd_min + cmd.kd } else { 0.0 };
    let solve = |force: f64, c: f64, k: f64| {
        (qdot + h * (force - 0.5 * c * qdot - 0.25 * k * dt * qdot)) / (1.0 + 0.5 * h * c + 0.25 * h * k * dt)
    };
    let error = cmd.setpoint - state.q;
    let v = solve(kp * error + tau_load - coulomb, kd + viscous, kp);
    let mid = 0.5 * (qdot + v);
    let unclamped = kp * (error - 0.5 * dt * mid) - kd * mid;
    let clamped = if cmd.powered {
        clamp_motor_torque(unclamped, qdot, params)
    } else {
        0.0
    };
    let (v, motor) = if clamped == unclamped {
        (v, unclamped)
    } else {
        // The active bound, linearised in velocity about `qdot`.
        let slope = if (clamped > 0.0) == (qdot > 0.0) {
            clamped.signum() * limit_slope(qdot, params)
        } else {
            0.0
        };
        let v = solve(clamped - slope * qdot + tau_load - coulomb, viscous - slope, 0.0);
        (v, clamped + slope * (0.5 * (qdot + v) - qdot))
    };

    if v * qdot <= 0.0 {
        // The joint stops inside the step. It stays at rest for the remainder
        // unless the drive at that instant breaks static friction.
        let stop = qdot / (qdot - v);
        let q_stop = state.q + 0.5 * qdot * stop * dt;
        let rest = JointState {
            q: q_stop,
            qdot: 0.0,
            t: state.t,
        };
        let remaining = (1.0 - stop) * dt;
        let tau_rest = if cmd.powered {
            clamp_motor_torque(raw_pd_torque(&rest, cmd, params), 0.0, params)
        } else {
            0.0
        };
        let drive = tau_rest + tau_load;
        let qdot_next = if drive.abs() <= params.friction_loss {
            0.0
        } else {
            (drive - params.friction_loss * drive.signum()) / inertia * remaining
        };
        return JointState {
            q: q_stop + 0.5 * qdot_next * remaining,
            qdot: qdot_next,
            t: state.t + dt,
        };
    }

    let qdot_next = if motor * qdot > 0.0 && qdot.abs() <= params.qdot_max && v.abs() > params.qdot_max {
        // The ceiling vanishes above qdot_max: slide along it unless the joint
        // overshoots even with the motor off.
        let coasting = solve(tau_load - coulomb, viscous, 0.0);
        if coasting.abs() <= params.qdot_max {
            params.qdot_max.copysign(qdot)
        } else {
            coasting
        }
    } else {
        v
    };
    JointState {
        q: state.q + 0.5 * (qdot + qdot_next) * dt,
        qdot: qdot_next,
        t: state.t + dt,
    }
}

/// Simulate PD tracking of `setpoints`, starting at rest on the first setpoint.
///
/// Each setpoint is held for one sample interval, integrated with the
/// smallest number of equal substeps not exceeding [`DEFAULT_STEP`].
pub fn simulate_tracking(
    setpoints: &SetpointSeries,
    gains: PdGains,
    load: &LoadConfig,
    params: &ActuatorParams,
) -> Result<Trace> {
    let substeps = ((setpoints.dt / DEFAULT_STEP) - 1e-9).ceil().max(1.0) as usize;
    simulate_tracking_substeps(setpoints, gains, load, params, substeps)
}

pub fn simulate_tracking_substeps(
    setpoints: &SetpointSeries,
    gains: PdGains,
    load: &LoadConfig,
    params: &ActuatorParams,
    substeps: usize,
) -> Result<Trace> {
    let mut states = Vec::with_capacity(setpoints.len());
    simulate_states(setpoints, gains, load, params, substeps, &mut states)?;
    let rows = states
        .iter()
        .zip(&setpoints.values)
        .map(|(s, &setpoint)| TraceRow {
            t: s.t,
            setpoint,
            q: s.q,
            qdot: s.qdot,
            tau: None,
        })
        .collect();
    Ok(Trace {
        dt: setpoints.dt,
        rows,
        metadata: Vec::new(),
    })
}

/// Core tracking loop: fills `out` with one state per setpoint sample.
pub fn simulate_states(
    setpoints: &SetpointSeries,
    gains: PdGains,
    load: &LoadConfig,
    params: &ActuatorParams,
    substeps: usize,
    out: &mut Vec<JointState>,
) -> Result<()> {
    if setpoints.is_empty() {
        return Err(Error::InsufficientData("empty setpoint series".into()));
    }
    if !(setpoints.dt > 0.0 && setpoints.dt.is_finite()) {
        return Err(Error::invariant("dt", "sample interval must be > 0"));
    }
    if setpoints.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("setpoint"));
    }
    if !(gains.kp >= 0.0 && gains.kd >= 0.0) {
        return Err(Error::invariant("kp", "gains must be >= 0"));
    }
    let substeps = substeps.max(1);
    let h = setpoints.dt / substeps as f64;
    if h > MAX_STEP {
        return Err(Error::invariant("dt", format!("substep {h} exceeds {MAX_STEP}")));
    }
    load.validate()?;
    if !(params.armature + load.inertia > 0.0) {
        return Err(Error::invariant("inertia", "total inertia must be > 0"));
    }

    out.clear();
    let mut state = JointState::at_rest(setpoints.values[0]);
    out.push(state);
    for (i, &setpoint) in setpoints.values[..setpoints.len() - 1].iter().enumerate() {
        let cmd = gains.command(setpoint);
        for _ in 0..substeps {
            state = advance(&state, &cmd, load, h, params);
        }
        // Re-anchor time to the sample grid so substep sums do not drift.
        state.t = (i + 1) as f64 * setpoints.dt;
        out.push(state);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MotorFamily;
    use approx::assert_relative_eq;

    fn xc330() -> ActuatorParams {
        MotorFamily::Xc330.params()
    }

    #[test]
    fn pd_identity_and_proportional() {
        let p = ActuatorParams {
            kd_min: 0.0,
            ..xc330()
        };
        let s = JointState::at_rest(0.3);
        let cmd = PdGains::physical(7.0, 2.0).command(0.3);
        assert_eq!(pd_torque(&s, &cmd, &xc330()).unwrap(), 0.0);
        let cmd = PdGains::physical(1.0, 0.0).command(0.4);
        assert_relative_eq!(pd_torque(&s, &cmd, &p).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn pd_kd_min_applies_when_powered() {
        let s = JointState {
            q: 0.0,
            qdot: 1.0,
            t: 0.0,
        };
        let cmd = PdGains::physical(0.0, 0.0).command(0.0);
        assert_relative_eq!(pd_torque(&s, &cmd, &xc330()).unwrap(), -0.384, epsilon = 1e-15);
        assert_eq!(
            pd_torque(&s, &ControlCommand::unpowered(), &xc330()).unwrap(),
            0.0
        );
    }

    #[test]
    fn pd_rejects_nan() {
        let s = JointState {
            q: f64::NAN,
            qdot: 0.0,
            t: 0.0,
        };
        let cmd = PdGains::physical(1.0, 0.0).command(0.0);
        assert!(pd_torque(&s, &cmd, &xc330()).is_err());
    }

    #[test]
    fn unitless_gain_is_converted() {
        let mut cmd = PdGains::physical(300.0, 0.0).command(0.0);
        cmd.units = GainUnits::Unitless;
        assert_relative_eq!(cmd.physical_kp(&xc330()), 2.0);
    }

    #[test]
    fn torque_limit_anchors() {
        let p = xc330();
        assert_eq!(torque_limit(0.0, &p), 0.76);
        assert_eq!(torque_limit(1.8, &p), 0.76);
        assert_eq!(torque_limit(6.5, &p), 0.48);
        assert_eq!(torque_limit(-6.5, &p), 0.48);
        assert_relative_eq!(torque_limit((1.8 + 6.5) / 2.0, &p), 0.62, epsilon = 1e-12);
        assert_eq!(torque_limit(6.5 + 1e-9, &p), 0.0);
    }

    #[test]
    fn resistance_examples() {
        let p = xc330();
        assert_relative_eq!(resistance_torque(1.0, &p, false), 0.0396, epsilon = 1e-15);
        assert_relative_eq!(resistance_torque(1.0, &p, true), 0.1188, epsilon = 1e-15);
        assert_relative_eq!(resistance_torque(1e-12, &p, false), 0.036, epsilon = 1e-12);
    }

    #[test]
    fn net_torque_examples() {
        let p = xc330();
        assert_eq!(net_torque(0.0, 0.0, &p), 0.0);
        assert_relative_eq!(net_torque(10.0, 1.0, &p), 0.7204, epsilon = 1e-12);
        assert_relative_eq!(net_torque(-10.0, 1.0, &p), -1.7896, epsilon = 1e-12);
        // Mirror image for negative velocity.
        assert_relative_eq!(net_torque(-10.0, -1.0, &p), -0.7204, epsilon = 1e-12);
        assert_relative_eq!(net_torque(10.0, -1.0, &p), 1.7896, epsilon = 1e-12);
    }

    #[test]
    fn step_equilibrium() {
        let p = xc330();
        let s = JointState::at_rest(0.2);
        let cmd = PdGains::physical(5.0, 0.0).command(0.2);
        let next = step(&s, &cmd, &LoadConfig::free(), 1e-3, &p).unwrap();
        assert_eq!(next.q, 0.2);
        assert_eq!(next.qdot, 0.0);
        assert_eq!(next.t, 1e-3);
    }

    #[test]
    fn step_breakaway_from_rest() {
        let p = xc330();
        let tau_e = 0.1;
        let load = LoadConfig {
            inertia: 0.001,
            external_torque: ExternalTorque::Constant(tau_e),
            gravity_torque_amplitude: 0.0,
        };
        let dt = 1e-3;
        let next = step(
            &JointState::at_rest(0.0),
            &ControlCommand::unpowered(),
            &load,
            dt,
            &p,
        )
        .unwrap();
        let expected = (tau_e - p.friction_loss) * dt / (p.armature + 0.001);
        assert_relative_eq!(next.qdot, expected, epsilon = 1e-15);
    }

    #[test]
    fn stiction_holds_below_friction() {
        let p = xc330();
        let load = LoadConfig {
            inertia: 0.0,
            external_torque: ExternalTorque::Constant(0.9 * p.friction_loss),
            gravity_torque_amplitude: 0.0,
        };
        let next = step(
            &JointState::at_rest(0.0),
            &ControlCommand::unpowered(),
            &load,
            1e-3,
            &p,
        )
        .unwrap();
        assert_eq!(next.qdot, 0.0);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let p = ActuatorParams {
            armature: 0.0,
            ..xc330()
        };
        let cmd = ControlCommand::unpowered();
        assert!(step(&JointState::default(), &cmd, &LoadConfig::free(), 1e-3, &p).is_err());
        assert!(step(&JointState::default(), &cmd, &LoadConfig::free(), 5e-3, &xc330()).is_err());
    }

    #[test]
    fn spin_down_energy_decreases() {
        let p = xc330();
        let mut s = JointState {
            q: 0.0,
            qdot: 5.0,
            t: 0.0,
        };
        let cmd = ControlCommand::unpowered();
        let load = LoadConfig::free();
        let mut energy = 0.5 * p.armature * s.qdot * s.qdot;
        while s.qdot != 0.0 {
            s = step(&s, &cmd, &load, 1e-3, &p).unwrap();
            let e = 0.5 * p.armature * s.qdot * s.qdot;
            assert!(e < energy);
            energy = e;
            assert!(s.t < 10.0);
        }
    }

    #[test]
    fn simulate_rejects_empty() {
        let sp = SetpointSeries {
            dt: 0.01,
            values: vec![],
        };
        assert!(simulate_tracking(&sp, PdGains::physical(1.0, 0.0), &LoadConfig::free(), &xc330()).is_err());
    }

    #[test]
    fn constant_setpoint_stays_put() {
        let sp = SetpointSeries::constant(0.4, 0.01, 200);
        let tr = simulate_tracking(&sp, PdGains::physical(5.0, 0.1), &LoadConfig::free(), &xc330()).unwrap();
        assert_eq!(tr.len(), 200);
        assert!(tr
            .positions()
            .all(|q| (q - 0.4).abs() <= STICTION_VELOCITY * 0.01));
    }
}
