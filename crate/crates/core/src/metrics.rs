//! Scale-free humanoid capability metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyGroup {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor: Option<String>,
    /// Peak (stall) torque, N·m.
    pub tau_max: f64,
    pub group: BodyGroup,
    /// Grippers and other end effectors.
    #[serde(default)]
    pub end_effector: bool,
}

/// Actuated joints of a robot with its overall size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueInventory {
    /// m
    pub height: f64,
    /// kg
    pub mass: f64,
    #[serde(rename = "joints", default)]
    pub entries: Vec<InventoryEntry>,
}

impl TorqueInventory {
    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::invariant("height", "must be > 0"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invariant("mass", "must be > 0"));
        }
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| !(e.tau_max >= 0.0 && e.tau_max.is_finite()))
        {
            return Err(Error::invariant(
                "tau_max",
                format!("joint `{}` has tau_max {}", e.name, e.tau_max),
            ));
        }
        Ok(())
    }

    /// Subset of joints in one body group, keeping height and mass.
    pub fn group(&self, group: BodyGroup) -> TorqueInventory {
        TorqueInventory {
            height: self.height,
            mass: self.mass,
            entries: self
                .entries
                .iter()
                .filter(|e| e.group == group)
                .cloned()
                .collect(),
        }
    }

    pub fn torque_sum(&self, include_end_effectors: bool) -> f64 {
        self.entries
            .iter()
            .filter(|e| include_end_effectors || !e.end_effector)
            .map(|e| e.tau_max.abs())
            .sum()
    }
}

/// The 30-DoF ToddlerBot inventory plus its two grippers.
pub fn toddlerbot_inventory() -> TorqueInventory {
    crate::io::parse_inventory(include_str!("../presets/toddlerbot_inventory.toml"))
        .expect("bundled inventory is valid")
}

/// Sum of peak joint torques over height times weight. End effectors are
/// excluded.
pub fn power_factor(inv: &TorqueInventory) -> Result<f64> {
    power_factor_with(inv, false)
}

pub fn power_factor_with(inv: &TorqueInventory, include_end_effectors: bool) -> Result<f64> {
    inv.validate()?;
    Ok(inv.torque_sum(include_end_effectors) / (inv.height * inv.mass * GRAVITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFactorReport {
    pub torque_sum: f64,
    pub total: f64,
    pub upper: f64,
    pub lower: f64,
}

pub fn power_factor_report(inv: &TorqueInventory, include_end_effectors: bool) -> Result<PowerFactorReport> {
    Ok(PowerFactorReport {
        torque_sum: inv.torque_sum(include_end_effectors),
        total: power_factor_with(inv, include_end_effectors)?,
        upper: power_factor_with(&inv.group(BodyGroup::Upper), include_end_effectors)?,
        lower: power_factor_with(&inv.group(BodyGroup::Lower), include_end_effectors)?,
    })
}

/// Transfer a joint torque requirement from a human to a robot by the ratio of
/// height times mass.
pub fn scale_torque(
    robot_height: f64,
    robot_mass: f64,
    human_height: f64,
    human_mass: f64,
    human_torque: f64,
) -> Result<f64> {
    let dims = [
        ("robot_height", robot_height),
        ("robot_mass", robot_mass),
        ("human_height", human_height),
        ("human_mass", human_mass),
    ];
    for (name, v) in dims {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invariant(name, format!("must be > 0, got {v}")));
        }
    }
    if !human_torque.is_finite() {
        return Err(Error::NonFinite("human_torque"));
    }
    Ok(robot_height * robot_mass / (human_height * human_mass) * human_torque)
}

/// Tip deflection of a cantilever relative to its length, `P / (3 E L²)`,
/// with the second moment of area taken to scale as `L⁴`.
pub fn relative_deflection(load: f64, modulus: f64, length: f64) -> Result<f64> {
    for (name, v) in [("load", load), ("modulus", modulus), ("length", length)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invariant(name, format!("must be > 0, got {v}")));
        }
    }
    Ok(load / (3.0 * modulus * length * length))
}
