//! Simulated motor test-bed experiments and the estimators fed by them.
//!
//! * Backdrive: the joint is driven at constant speeds while a torque sensor
//!   reads the resistance. A line fit gives friction loss (intercept) and
//!   damping (slope).
//! * Spin-down: the joint is released unpowered from a known speed. The
//!   energy dissipated by the identified resistance gives the armature.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::actuator::{self, ControlCommand, JointState, LoadConfig, STICTION_VELOCITY};
use crate::error::{Error, Result};
use crate::params::ActuatorParams;
use crate::trace::SetpointSeries;

/// Torque sensor precision of the reference test stand, N·m.
pub const SENSOR_NOISE_STD: f64 = 3e-4;

/// Spin-down runs longer than this are cut off, s.
pub const SPINDOWN_TIME_LIMIT: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpSpec {
    /// Start frequency, Hz.
    pub f0: f64,
    /// End frequency, Hz.
    pub f1: f64,
    /// rad
    pub amplitude: f64,
    /// rad
    pub offset: f64,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
}

impl ChirpSpec {
    /// Excitation used to build self-generated identification references.
    pub fn identification() -> Self {
        ChirpSpec {
            f0: 0.2,
            f1: 4.0,
            amplitude: 0.5,
            offset: 0.0,
            duration: 10.0,
            dt: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.f0,
            self.f1,
            self.amplitude,
            self.offset,
            self.duration,
            self.dt,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("chirp spec"));
        }
        if !(self.f0 > 0.0 && self.f1 > 0.0) {
            return Err(Error::invariant("f0", "frequencies must be > 0"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::invariant("duration", "must be > 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invariant("dt", "must be > 0"));
        }
        if self.f0.max(self.f1) * self.dt >= 0.5 {
            return Err(Error::invariant(
                "dt",
                format!("sampling violates Nyquist for {} Hz", self.f0.max(self.f1)),
            ));
        }
        Ok(())
    }

    /// Sweep phase in cycles at time `t`.
    pub fn phase_cycles(&self, t: f64) -> f64 {
        self.f0 * t + (self.f1 - self.f0) * t * t / (2.0 * self.duration)
    }

    /// Instantaneous frequency in Hz.
    pub fn frequency_at(&self, t: f64) -> f64 {
        self.f0 + (self.f1 - self.f0) * t / self.duration
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * self.phase_cycles(t)).sin()
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }
}

/// Linear-frequency sweep sampled at `spec.dt` over `[0, duration]`.
pub fn gen_chirp(spec: &ChirpSpec) -> Result<SetpointSeries> {
    spec.validate()?;
    let values = (0..spec.sample_count())
        .map(|i| spec.value_at(i as f64 * spec.dt))
        .collect();
    Ok(SetpointSeries { dt: spec.dt, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackdriveSample {
    /// rad/s
    pub omega: f64,
    /// N·m
    pub tau_resist: f64,
}

/// `n` speeds log-spaced over `[0.5, 0.9 * qdot_max]`.
pub fn default_backdrive_speeds(params: &ActuatorParams, n: usize) -> Vec<f64> {
    let lo: f64 = 0.5;
    let hi = (0.9 * params.qdot_max).max(lo);
    if n == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Measure powered-off resistance at each speed, with Gaussian sensor noise.
pub fn run_backdrive(
    params: &ActuatorParams,
    omegas: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<Vec<BackdriveSample>> {
    if let Some(&w) = omegas.iter().find(|w| !(**w > STICTION_VELOCITY)) {
        return Err(Error::invariant(
            "omega",
            format!("backdrive speed {w} is below the stiction threshold"),
        ));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invariant("noise_std", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invariant("noise_std", e.to_string()))?;
    Ok(omegas
        .iter()
        .map(|&omega| BackdriveSample {
            omega,
            tau_resist: actuator::resistance_torque(omega, params, false) + noise.sample(&mut rng),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionFit {
    pub friction_loss: f64,
    pub damping: f64,
    /// Set when the least-squares intercept was negative and clamped to 0.
    pub intercept_clamped: bool,
}

/// Ordinary least-squares line through the (speed, torque) samples.
pub fn fit_friction_damping(samples: &[BackdriveSample]) -> Result<FrictionFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 backdrive samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean_w = samples.iter().map(|s| s.omega).sum::<f64>() / n;
    let mean_t = samples.iter().map(|s| s.tau_resist).sum::<f64>() / n;
    let (sxx, sxy) = samples.iter().fold((0.0, 0.0), |(sxx, sxy), s| {
        let dw = s.omega - mean_w;
        (sxx + dw * dw, sxy + dw * (s.tau_resist - mean_t))
    });
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all backdrive speeds are equal".into()));
    }
    let damping = sxy / sxx;
    let intercept = mean_t - damping * mean_w;
    Ok(FrictionFit {
        friction_loss: intercept.max(0.0),
        damping,
        intercept_clamped: intercept < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpindownTrace {
    pub dt: f64,
    /// Speed samples from the release speed down to rest.
    pub omega_series: Vec<f64>,
    /// False when the run hit the time limit before stopping.
    pub reached_rest: bool,
}

/// Release the unpowered joint at `omega0` and record it coasting to rest.
pub fn run_spindown(params: &ActuatorParams, omega0: f64, dt: f64) -> Result<SpindownTrace> {
    run_spindown_limited(params, omega0, dt, SPINDOWN_TIME_LIMIT)
}

pub fn run_spindown_limited(
    params: &ActuatorParams,
    omega0: f64,
    dt: f64,
    time_limit: f64,
) -> Result<SpindownTrace> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::invariant("omega0", "release speed must be > 0"));
    }
    let cmd = ControlCommand::unpowered();
    let load = LoadConfig::free();
    let max_steps = (time_limit / dt).ceil() as usize;
    let mut state = JointState {
        q: 0.0,
        qdot: omega0,
        t: 0.0,
    };
    let mut omega_series = vec![omega0];
    for _ in 0..max_steps {
        state = actuator::step(&state, &cmd, &load, dt, params)?;
        omega_series.push(state.qdot);
        if state.qdot == 0.0 {
            return Ok(SpindownTrace {
                dt,
                omega_series,
                reached_rest: true,
            });
        }
    }
    Ok(SpindownTrace {
        dt,
        omega_series,
        reached_rest: false,
    })
}

/// Armature from the energy dissipated over a spin-down: `I = 2E / ω₀²`.
///
/// `E` is the trapezoidal integral of `tau_f·|ω| + d·ω²`.
pub fn estimate_armature(trace: &SpindownTrace, tau_f: f64, damping: f64) -> Result<f64> {
    if trace.omega_series.len() < 2 {
        return Err(Error::InsufficientData(
            "spin-down trace needs at least 2 samples".into(),
        ));
    }
    let omega0 = trace.omega_series[0];
    if !(omega0.abs() > 0.0) {
        return Err(Error::invariant("omega0", "initial speed must be nonzero"));
    }
    let power = |w: f64| tau_f * w.abs() + damping * w * w;
    let energy: f64 = trace
        .omega_series
        .windows(2)
        .map(|w| 0.5 * trace.dt * (power(w[0]) + power(w[1])))
        .sum();
    Ok(2.0 * energy / (omega0 * omega0))
}
