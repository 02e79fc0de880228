//! Actuation-model parameters and the bundled motor presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the servo actuation model for one motor family.
///
/// Units: torques in N·m, velocities in rad/s, damping-like gains in
/// N·m·s/rad, armature in kg·m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams {
    /// Passive viscous damping.
    pub damping: f64,
    /// Reflected rotor inertia.
    pub armature: f64,
    /// Coulomb friction torque.
    pub friction_loss: f64,
    /// Torque ceiling at low speed.
    pub tau_max: f64,
    /// Speed at which the ceiling starts dropping.
    pub qdot_tau_max: f64,
    /// Speed at the end of the linear drop; above it the ceiling is zero.
    pub qdot_max: f64,
    /// Ceiling value reached at `qdot_max`.
    pub tau_at_qdot_max: f64,
    /// Derivative gain the motor applies whenever it is powered.
    pub kd_min: f64,
    /// Constant limit on decelerating torque.
    pub tau_brake: f64,
    /// Amplification of passive resistance when back-driven (1/η²).
    pub passive_active_ratio: f64,
    /// Divisor from vendor unitless kp to physical kp.
    pub kp_conversion: f64,
}

impl ActuatorParams {
    /// Names in field order, as used in parameter files.
    pub const FIELD_NAMES: [&'static str; 11] = [
        "damping",
        "armature",
        "friction_loss",
        "tau_max",
        "qdot_tau_max",
        "qdot_max",
        "tau_at_qdot_max",
        "kd_min",
        "tau_brake",
        "passive_active_ratio",
        "kp_conversion",
    ];

    pub const FIELD_UNITS: [&'static str; 11] = [
        "N*m*s/rad",
        "kg*m^2",
        "N*m",
        "N*m",
        "rad/s",
        "rad/s",
        "N*m",
        "N*m*s/rad",
        "N*m",
        "1",
        "1",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.damping,
            self.armature,
            self.friction_loss,
            self.tau_max,
            self.qdot_tau_max,
            self.qdot_max,
            self.tau_at_qdot_max,
            self.kd_min,
            self.tau_brake,
            self.passive_active_ratio,
            self.kp_conversion,
        ]
    }

    pub fn from_values(v: [f64; 11]) -> Self {
        ActuatorParams {
            damping: v[0],
            armature: v[1],
            friction_loss: v[2],
            tau_max: v[3],
            qdot_tau_max: v[4],
            qdot_max: v[5],
            tau_at_qdot_max: v[6],
            kd_min: v[7],
            tau_brake: v[8],
            passive_active_ratio: v[9],
            kp_conversion: v[10],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::FIELD_NAMES.iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(Error::invariant(name, "must be finite"));
            }
            if v < 0.0 {
                return Err(Error::invariant(name, format!("must be >= 0, got {v}")));
            }
        }
        if self.qdot_tau_max <= 0.0 {
            return Err(Error::invariant("qdot_tau_max", "must be > 0"));
        }
        if self.qdot_max <= self.qdot_tau_max {
            return Err(Error::invariant(
                "qdot_max",
                format!(
                    "must exceed qdot_tau_max ({} <= {})",
                    self.qdot_max, self.qdot_tau_max
                ),
            ));
        }
        if self.tau_at_qdot_max > self.tau_max {
            return Err(Error::invariant(
                "tau_at_qdot_max",
                format!(
                    "must not exceed tau_max ({} > {})",
                    self.tau_at_qdot_max, self.tau_max
                ),
            ));
        }
        if self.tau_brake < self.tau_max {
            return Err(Error::invariant(
                "tau_brake",
                format!("must be >= tau_max ({} < {})", self.tau_brake, self.tau_max),
            ));
        }
        if self.passive_active_ratio < 1.0 {
            return Err(Error::invariant("passive_active_ratio", "must be >= 1"));
        }
        Ok(())
    }

    pub fn preset(family: MotorFamily) -> ActuatorParams {
        family.params()
    }
}

/// The five Dynamixel families with bundled, identified parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotorFamily {
    Xl430Dual,
    Xc330,
    Xc430,
    Xc430Dual,
    Xm430W210,
}

impl MotorFamily {
    pub const ALL: [MotorFamily; 5] = [
        MotorFamily::Xl430Dual,
        MotorFamily::Xc330,
        MotorFamily::Xc430,
        MotorFamily::Xc430Dual,
        MotorFamily::Xm430W210,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotorFamily::Xl430Dual => "2XL430",
            MotorFamily::Xc330 => "XC330",
            MotorFamily::Xc430 => "XC430",
            MotorFamily::Xc430Dual => "2XC430",
            MotorFamily::Xm430W210 => "XM430-W210",
        }
    }

    /// Bundled preset file contents.
    pub fn preset_source(self) -> &'static str {
        match self {
            MotorFamily::Xl430Dual => include_str!("../presets/2xl430.toml"),
            MotorFamily::Xc330 => include_str!("../presets/xc330.toml"),
            MotorFamily::Xc430 => include_str!("../presets/xc430.toml"),
            MotorFamily::Xc430Dual => include_str!("../presets/2xc430.toml"),
            MotorFamily::Xm430W210 => include_str!("../presets/xm430-w210.toml"),
        }
    }

    pub fn preset_file_name(self) -> String {
        format!("{}.toml", self.name().to_ascii_lowercase())
    }

    pub fn params(self) -> ActuatorParams {
        crate::io::parse_param_file(self.preset_source())
            .expect("bundled preset is valid")
            .params
    }
}

impl fmt::Display for MotorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotorFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}
