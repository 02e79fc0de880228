//! Joint identification of the actuation model from position tracking logs.
//!
//! The nine model parameters are searched inside a box with a bounded
//! simplex method, restarted from seeded uniform starting points. The
//! objective is the mean absolute position error, in degrees, between the
//! reference log and a simulation driven by the logged setpoints and gains.
//! The passive-active ratio and the kp conversion factor are held fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::actuator::{self, JointState, LoadConfig, PdGains, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::optim::{minimize_bounded, NelderMeadConfig};
use crate::params::{ActuatorParams, MotorFamily};
use crate::testbed::{gen_chirp, ChirpSpec};
use crate::trace::{SetpointSeries, Trace};

/// Number of parameters searched by [`fit_parameters`].
pub const FITTED_COUNT: usize = 9;

/// Names of the searched parameters, in vector order.
pub const FITTED_NAMES: [&str; FITTED_COUNT] = [
    "damping",
    "armature",
    "friction_loss",
    "tau_max",
    "qdot_tau_max",
    "qdot_max",
    "tau_at_qdot_max",
    "kd_min",
    "tau_brake",
];

fn fitted_vector(p: &ActuatorParams) -> [f64; FITTED_COUNT] {
    let v = p.values();
    std::array::from_fn(|i| v[i])
}

fn with_fitted(v: &[f64; FITTED_COUNT], passive_active_ratio: f64, kp_conversion: f64) -> ActuatorParams {
    let mut all = [0.0; 11];
    all[..FITTED_COUNT].copy_from_slice(v);
    all[9] = passive_active_ratio;
    all[10] = kp_conversion;
    ActuatorParams::from_values(all)
}

/// Per-parameter search ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub lower: [f64; FITTED_COUNT],
    pub upper: [f64; FITTED_COUNT],
}

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        for (i, name) in FITTED_NAMES.iter().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::NonFinite("parameter bound"));
            }
            if lo < 0.0 {
                return Err(Error::invariant(name, format!("lower bound {lo} < 0")));
            }
            if lo > hi {
                return Err(Error::invariant(
                    name,
                    format!("lower bound {lo} exceeds upper bound {hi}"),
                ));
            }
        }
        with_fitted(&self.lower, 1.0, 1.0).validate()?;
        with_fitted(&self.upper, 1.0, 1.0).validate()?;
        Ok(())
    }

    pub fn bounds_of(&self, name: &str) -> Option<(f64, f64)> {
        let i = FITTED_NAMES.iter().position(|n| *n == name)?;
        Some((self.lower[i], self.upper[i]))
    }

    pub fn contains(&self, p: &ActuatorParams) -> bool {
        let v = fitted_vector(p);
        (0..FITTED_COUNT).all(|i| self.lower[i] <= v[i] && v[i] <= self.upper[i])
    }

    /// Bounds at `[lo_factor, hi_factor]` times each parameter of `p`.
    pub fn around(p: &ActuatorParams, lo_factor: f64, hi_factor: f64) -> Self {
        let v = fitted_vector(p);
        ParamBounds {
            lower: v.map(|x| x * lo_factor),
            upper: v.map(|x| x * hi_factor),
        }
    }

    /// Map a point of the unit cube to parameter values.
    ///
    /// Ranges with a positive lower bound are traversed geometrically, the
    /// rest linearly. The result is repaired to respect the ordering
    /// constraints between speed and torque anchors.
    fn decode(&self, u: &[f64]) -> [f64; FITTED_COUNT] {
        let mut v: [f64; FITTED_COUNT] = std::array::from_fn(|i| {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo > 0.0 {
                lo * (hi / lo).powf(u[i])
            } else {
                lo + (hi - lo) * u[i]
            }
            .clamp(lo, hi)
        });
        // [tau_max, qdot_tau_max, qdot_max, tau_at_qdot_max, tau_brake]
        let min_qdot_max = v[4] * (1.0 + 1e-9) + 1e-12;
        if v[5] < min_qdot_max {
            v[5] = min_qdot_max.min(self.upper[5]);
        }
        v[6] = v[6].min(v[3]);
        v[8] = v[8].max(v[3]);
        v
    }

    fn encode(&self, v: &[f64; FITTED_COUNT]) -> Vec<f64> {
        (0..FITTED_COUNT)
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                if hi <= lo {
                    0.0
                } else if lo > 0.0 {
                    ((v[i] / lo).ln() / (hi / lo).ln()).clamp(0.0, 1.0)
                } else {
                    ((v[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

/// Search box for a motor family (`[0.2x, 5x]` its preset values) or, with no
/// family, the hull of all presets widened by a factor of 2 on each side.
pub fn default_bounds(family: Option<MotorFamily>) -> ParamBounds {
    match family {
        Some(f) => ParamBounds::around(&f.params(), 0.2, 5.0),
        None => {
            let mut lower = [f64::INFINITY; FITTED_COUNT];
            let mut upper = [0.0f64; FITTED_COUNT];
            for f in MotorFamily::ALL {
                let v = fitted_vector(&f.params());
                for i in 0..FITTED_COUNT {
                    lower[i] = lower[i].min(v[i]);
                    upper[i] = upper[i].max(v[i]);
                }
            }
            ParamBounds {
                lower: lower.map(|x| x / 2.0),
                upper: upper.map(|x| x * 2.0),
            }
        }
    }
}

/// [`default_bounds`] with the family given by name.
pub fn default_bounds_named(family: Option<&str>) -> Result<ParamBounds> {
    family
        .map(str::parse::<MotorFamily>)
        .transpose()
        .map(default_bounds)
}

/// Mean absolute position error between two traces, in degrees.
pub fn tracking_error(reference: &Trace, simulated: &Trace) -> Result<f64> {
    if reference.len() != simulated.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: simulated.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    if (reference.dt - simulated.dt).abs() > 1e-12 * reference.dt.abs().max(1.0) {
        return Err(Error::invariant(
            "dt",
            format!("sample intervals differ: {} vs {}", reference.dt, simulated.dt),
        ));
    }
    let sum: f64 = reference
        .positions()
        .zip(simulated.positions())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((sum / reference.len() as f64).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    /// Objective evaluations allowed per restart.
    pub max_iters: usize,
    pub seed: u64,
    pub passive_active_ratio: f64,
    pub kp_conversion: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 8,
            max_iters: 4000,
            seed: 0,
            passive_active_ratio: 3.0,
            kp_conversion: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ActuatorParams,
    pub mae_deg: f64,
    /// Objective evaluations across all restarts.
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    /// Index of the restart that produced `params`.
    pub best_restart: usize,
    /// Objective value at that restart's starting point.
    pub start_mae_deg: f64,
}

/// Evaluates the tracking objective for candidate parameters.
struct Objective<'a> {
    reference: Vec<f64>,
    setpoints: SetpointSeries,
    gains: PdGains,
    load: &'a LoadConfig,
    substeps: usize,
    scratch: Vec<JointState>,
}

impl<'a> Objective<'a> {
    fn new(reference: &Trace, gains: PdGains, load: &'a LoadConfig) -> Self {
        let substeps = ((reference.dt / DEFAULT_STEP) - 1e-9).ceil().max(1.0) as usize;
        Objective {
            reference: reference.positions().collect(),
            setpoints: reference.setpoints(),
            gains,
            load,
            substeps,
            scratch: Vec::with_capacity(reference.len()),
        }
    }

    fn mae_deg(&mut self, params: &ActuatorParams) -> f64 {
        match actuator::simulate_states(
            &self.setpoints,
            self.gains,
            self.load,
            params,
            self.substeps,
            &mut self.scratch,
        ) {
            Ok(()) => {
                let sum: f64 = self
                    .reference
                    .iter()
                    .zip(&self.scratch)
                    .map(|(r, s)| (r - s.q).abs())
                    .sum();
                let mae = (sum / self.reference.len() as f64).to_degrees();
                if mae.is_finite() {
                    mae
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}

/// Fit all nine actuation parameters to a tracking log.
pub fn fit_parameters(
    reference: &Trace,
    gains: PdGains,
    load: &LoadConfig,
    bounds: &ParamBounds,
    config: &FitConfig,
) -> Result<FitResult> {
    if reference.is_empty() {
        return Err(Error::InsufficientData("empty reference trace".into()));
    }
    reference.validate()?;
    bounds.validate()?;
    load.validate()?;
    if config.restarts == 0 {
        return Err(Error::invariant("restarts", "need at least one restart"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let starts: Vec<[f64; FITTED_COUNT]> = (0..config.restarts)
        .map(|_| std::array::from_fn(|i| rng.gen_range(bounds.lower[i]..=bounds.upper[i])))
        .collect();

    let mut objective = Objective::new(reference, gains, load);
    let (ratio, kp_conv) = (config.passive_active_ratio, config.kp_conversion);
    let mut iterations = 0;
    let mut best: Option<FitResult> = None;

    for (index, start) in starts.iter().enumerate() {
        let mut eval = |u: &[f64]| objective.mae_deg(&with_fitted(&bounds.decode(u), ratio, kp_conv));
        let mut x = bounds.encode(start);
        let start_mae = eval(&x);
        let mut value = start_mae;
        let mut used = 1;
        let mut converged = false;
        let mut step = 0.25;
        // Re-seed the simplex around the incumbent until it stops improving.
        while used < config.max_iters {
            let nm = NelderMeadConfig {
                max_evals: config.max_iters - used,
                initial_step: step,
                f_tol: 1e-9,
                x_tol: 1e-7,
                f_target: 0.0,
            };
            let m = minimize_bounded(&mut eval, &x, &[0.0; FITTED_COUNT], &[1.0; FITTED_COUNT], &nm);
            used += m.evals;
            let improved = m.value < value - 1e-9;
            if m.value <= value {
                x = m.x;
                value = m.value;
            }
            if m.value <= 0.0 || (m.converged && !improved) {
                converged = m.converged;
                break;
            }
            step = (step * 0.5).max(0.02);
        }
        iterations += used;

        let params = with_fitted(&bounds.decode(&x), ratio, kp_conv);
        let candidate = FitResult {
            params,
            mae_deg: value,
            iterations: 0,
            restarts_used: 0,
            converged,
            best_restart: index,
            start_mae_deg: start_mae,
        };
        if best.as_ref().is_none_or(|b| candidate.mae_deg < b.mae_deg) {
            best = Some(candidate);
        }
    }

    let mut result = best.expect("at least one restart");
    result.iterations = iterations;
    result.restarts_used = config.restarts;
    Ok(result)
}

/// Excitation, gains and load used to log identification references.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub chirp: ChirpSpec,
    pub gains: PdGains,
    pub load: LoadConfig,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            chirp: ChirpSpec::identification(),
            gains: PdGains::physical(6.0, 0.0),
            load: LoadConfig::free(),
        }
    }
}

/// Simulated tracking log of `params` under `protocol`.
pub fn synthesize_reference(params: &ActuatorParams, protocol: &Protocol) -> Result<Trace> {
    let setpoints = gen_chirp(&protocol.chirp)?;
    let mut trace = actuator::simulate_tracking(&setpoints, protocol.gains, &protocol.load, params)?;
    trace.set_meta("kp", protocol.gains.kp);
    trace.set_meta("kd", protocol.gains.kd);
    trace.set_meta("load_inertia", protocol.load.inertia);
    Ok(trace)
}

/// Add Gaussian noise with standard deviation `std` (rad) to measured positions.
pub fn add_position_noise(trace: &Trace, std: f64, seed: u64) -> Result<Trace> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::invariant("noise_std", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = trace.clone();
    for row in &mut out.rows {
        row.q += normal.sample(&mut rng);
    }
    Ok(out)
}
