//! Walking reference generation and balance control laws.
//!
//! The centre of mass follows the linear inverted pendulum
//! `ẍ = ω² (x − p)`, `ω² = g / z_com`, driven by a piecewise-linear ZMP
//! reference `p`. On each linear piece the solution is `p + a·cosh + b·sinh`.
//! We solve it through the divergent component `ξ = x + ẋ/ω` (integrated
//! backward) and the convergent component `ζ = x − ẋ/ω` (integrated forward),
//! each of which is numerically stable in its own direction. The boundary
//! condition makes the pendulum state relative to the ZMP periodic over the
//! reference: `x(T) − p(T) = x(0) − p(0)` and `ẋ(T) = ẋ(0)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metrics::GRAVITY;

pub type Vec2 = [f64; 2];

pub const DEFAULT_Z_COM: f64 = 0.22;
pub const DEFAULT_STEP_DURATION: f64 = 0.5;
pub const DEFAULT_DOUBLE_SUPPORT: f64 = 0.2;
pub const DEFAULT_STANCE_WIDTH: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    fn lateral_sign(self) -> f64 {
        match self {
            Foot::Left => 1.0,
            Foot::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footstep {
    pub foot: Foot,
    /// Foot centre in the world frame, m.
    pub position: Vec2,
    /// rad
    pub heading: f64,
    /// s
    pub touchdown: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootstepPlan {
    pub steps: Vec<Footstep>,
    /// Support foot in place before the first step; the ZMP leaves it during
    /// the first double-support phase.
    pub initial_support: Footstep,
    pub step_duration: f64,
    pub double_support_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn lerp(a: Vec2, b: Vec2, s: f64) -> Vec2 {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]
}

/// Alternating footholds for a body-frame velocity command, starting with the
/// left foot at t = 0.
pub fn plan_footsteps(
    cmd: VelocityCommand,
    n_steps: usize,
    step_duration: f64,
    stance_width: f64,
) -> Result<FootstepPlan> {
    if n_steps < 2 {
        return Err(Error::invariant("n_steps", "need at least 2 steps"));
    }
    if !(step_duration > 0.0 && step_duration.is_finite()) {
        return Err(Error::invariant("step_duration", "must be > 0"));
    }
    if ![cmd.vx, cmd.vy, cmd.wz, stance_width]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::NonFinite("velocity command"));
    }
    let advance = [cmd.vx * step_duration, cmd.vy * step_duration];
    let foothold = |k: i64, centre: Vec2| {
        let heading = cmd.wz * step_duration * k as f64;
        let foot = if k.rem_euclid(2) == 0 {
            Foot::Left
        } else {
            Foot::Right
        };
        let offset = rotate([0.0, foot.lateral_sign() * stance_width / 2.0], heading);
        Footstep {
            foot,
            position: [centre[0] + offset[0], centre[1] + offset[1]],
            heading,
            touchdown: k as f64 * step_duration,
        }
    };

    let mut steps = Vec::with_capacity(n_steps);
    let mut centre = [0.0, 0.0];
    for k in 0..n_steps as i64 {
        steps.push(foothold(k, centre));
        let d = rotate(advance, cmd.wz * step_duration * k as f64);
        centre = [centre[0] + d[0], centre[1] + d[1]];
    }
    let back = rotate(advance, -cmd.wz * step_duration);
    let initial_support = foothold(-1, [-back[0], -back[1]]);

    Ok(FootstepPlan {
        steps,
        initial_support,
        step_duration,
        double_support_fraction: DEFAULT_DOUBLE_SUPPORT,
    })
}

impl FootstepPlan {
    pub fn with_double_support(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&fraction) {
            return Err(Error::invariant("double_support_fraction", "must be in [0, 0.5]"));
        }
        self.double_support_fraction = fraction;
        Ok(self)
    }

    pub fn duration(&self) -> f64 {
        self.steps.len() as f64 * self.step_duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.double_support_fraction) {
            return Err(Error::invariant("double_support_fraction", "must be in [0, 0.5]"));
        }
        if !(self.step_duration > 0.0) {
            return Err(Error::invariant("step_duration", "must be > 0"));
        }
        if self.steps.is_empty() {
            return Err(Error::invariant("steps", "plan has no steps"));
        }
        let mut prev = &self.initial_support;
        for s in &self.steps {
            if s.touchdown <= prev.touchdown {
                return Err(Error::invariant("touchdown", "times must strictly increase"));
            }
            if s.foot == prev.foot {
                return Err(Error::invariant("foot", "steps must alternate feet"));
            }
            prev = s;
        }
        Ok(())
    }

    /// Step index active at `t` and the time since its touchdown.
    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.steps.len() - 1;
        let k = ((t / self.step_duration).floor().max(0.0) as usize).min(last);
        (k, t - self.steps[k].touchdown)
    }

    fn previous(&self, k: usize) -> &Footstep {
        if k == 0 {
            &self.initial_support
        } else {
            &self.steps[k - 1]
        }
    }

    /// Feet in contact at `t`: two during double support, one otherwise.
    pub fn support_at(&self, t: f64) -> Vec<Footstep> {
        let (k, local) = self.locate(t);
        let ds = self.double_support_fraction * self.step_duration;
        if local < ds {
            vec![*self.previous(k), self.steps[k]]
        } else {
            vec![self.steps[k]]
        }
    }

    /// ZMP target at `t`.
    pub fn zmp_at(&self, t: f64) -> Vec2 {
        let (k, local) = self.locate(t);
        let ds = self.double_support_fraction * self.step_duration;
        if local < ds {
            lerp(self.previous(k).position, self.steps[k].position, local / ds)
        } else {
            self.steps[k].position
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZmpReference {
    pub dt: f64,
    /// Knots of the piecewise-linear ZMP path at `t = i * dt`.
    pub zmp: Vec<Vec2>,
}

/// Sample the plan's ZMP path over its full duration.
pub fn zmp_reference(plan: &FootstepPlan, dt: f64) -> Result<ZmpReference> {
    plan.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invariant("dt", "must be > 0"));
    }
    let n = (plan.duration() / dt).round() as usize;
    let zmp = (0..=n).map(|i| plan.zmp_at(i as f64 * dt)).collect();
    Ok(ZmpReference { dt, zmp })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComSample {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComTrajectory {
    pub dt: f64,
    pub z_com: f64,
    pub samples: Vec<ComSample>,
}

impl ComTrajectory {
    pub fn omega(&self) -> f64 {
        (GRAVITY / self.z_com).sqrt()
    }

    /// ZMP implied by the trajectory, `x − ẍ / ω²`.
    pub fn implied_zmp(&self) -> Vec<Vec2> {
        let k = self.z_com / GRAVITY;
        self.samples
            .iter()
            .map(|s| {
                [
                    s.position[0] - k * s.acceleration[0],
                    s.position[1] - k * s.acceleration[1],
                ]
            })
            .collect()
    }

    /// Largest `|ẍ − ω² (x − p)|` over all samples.
    pub fn max_residual(&self, zmp: &ZmpReference) -> f64 {
        let w2 = GRAVITY / self.z_com;
        self.samples
            .iter()
            .zip(&zmp.zmp)
            .flat_map(|(s, p)| (0..2).map(move |a| (s.acceleration[a] - w2 * (s.position[a] - p[a])).abs()))
            .fold(0.0, f64::max)
    }
}

/// Periodic LIPM solution along one axis. Returns (x − p, ẋ) per knot via the
/// divergent (`y = ξ − p`) and convergent (`z = ζ − p`) offsets.
fn solve_axis(p: &[f64], dt: f64, omega: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.len() - 1;
    if n == 0 {
        return Ok((vec![0.0], vec![0.0]));
    }
    let decay = (-omega * dt).exp();
    let gain = 1.0 - decay;
    let slope = |i: usize| (p[i + 1] - p[i]) / dt;

    let backward = |y_end: f64| {
        let mut y = vec![0.0; n + 1];
        y[n] = y_end;
        for i in (0..n).rev() {
            y[i] = slope(i) / omega * gain + decay * y[i + 1];
        }
        y
    };
    let forward = |z_start: f64| {
        let mut z = vec![0.0; n + 1];
        z[0] = z_start;
        for i in 0..n {
            z[i + 1] = -slope(i) / omega * gain + decay * z[i];
        }
        z
    };

    let cycle_decay = decay.powi(n as i32);
    let denom = 1.0 - cycle_decay;
    if !(denom > 1e-12) {
        return Err(Error::Divergent(format!(
            "reference too short for a periodic solution (decay {cycle_decay})"
        )));
    }
    let y_end = backward(0.0)[0] / denom;
    let z_start = forward(0.0)[n] / denom;
    let y = backward(y_end);
    let z = forward(z_start);
    if y.iter().chain(&z).any(|v| !v.is_finite() || v.abs() > 1e3) {
        return Err(Error::Divergent("pendulum offset exceeds 1 km".into()));
    }
    Ok((y, z))
}

/// Closed-form centre-of-mass trajectory tracking `zmp` at constant height.
pub fn com_trajectory(zmp: &ZmpReference, z_com: f64) -> Result<ComTrajectory> {
    if !(z_com > 0.0 && z_com.is_finite()) {
        return Err(Error::invariant("z_com", "must be > 0"));
    }
    if zmp.zmp.is_empty() {
        return Err(Error::InsufficientData("empty ZMP reference".into()));
    }
    if !(zmp.dt > 0.0) {
        return Err(Error::invariant("dt", "must be > 0"));
    }
    let omega = (GRAVITY / z_com).sqrt();
    let mut samples = vec![ComSample::default(); zmp.zmp.len()];
    for axis in 0..2 {
        let p: Vec<f64> = zmp.zmp.iter().map(|v| v[axis]).collect();
        let (y, z) = solve_axis(&p, zmp.dt, omega)?;
        for (i, s) in samples.iter_mut().enumerate() {
            let offset = 0.5 * (y[i] + z[i]);
            s.position[axis] = p[i] + offset;
            s.velocity[axis] = 0.5 * omega * (y[i] - z[i]);
            s.acceleration[axis] = omega * omega * offset;
        }
    }
    Ok(ComTrajectory {
        dt: zmp.dt,
        z_com,
        samples,
    })
}

/// Gait clock encoded on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitPhase {
    pub sin: f64,
    pub cos: f64,
}

pub fn phase_signal(t: f64, period: f64) -> Result<GaitPhase> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invariant("period", "must be > 0"));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    let phi = 2.0 * PI * t.rem_euclid(period) / period;
    let (sin, cos) = phi.sin_cos();
    Ok(GaitPhase { sin, cos })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceGains {
    pub com_kp: f64,
    pub com_kd: f64,
    pub pitch_kp: f64,
    pub pitch_kd: f64,
}

impl BalanceGains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("com_kp", self.com_kp),
            ("com_kd", self.com_kd),
            ("pitch_kp", self.pitch_kp),
            ("pitch_kd", self.pitch_kd),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invariant(name, "gain must be >= 0"));
            }
        }
        Ok(())
    }
}

/// CoM layer: correction pulling the CoM back toward the support centre.
pub fn com_pd(com_offset: Vec2, com_vel: Vec2, gains: &BalanceGains) -> Result<Vec2> {
    gains.validate()?;
    Ok([
        -gains.com_kp * com_offset[0] - gains.com_kd * com_vel[0],
        -gains.com_kp * com_offset[1] - gains.com_kd * com_vel[1],
    ])
}

/// Torso layer: hip-pitch correction keeping the torso upright.
pub fn torso_pitch_pd(pitch: f64, pitch_rate: f64, gains: &BalanceGains) -> Result<f64> {
    gains.validate()?;
    Ok(-gains.pitch_kp * pitch - gains.pitch_kd * pitch_rate)
}
