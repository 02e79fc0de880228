//! Servo actuator simulation and identification.
//!
//! * [`actuator`]: PD-controlled joint dynamics with a velocity-dependent
//!   torque envelope, braking limit, Coulomb/viscous resistance and stiction.
//! * [`testbed`]: simulated backdrive and spin-down experiments with their
//!   closed-form estimators, plus chirp excitation.
//! * [`sysid`]: multi-start bounded simplex fitting of the full model to a
//!   tracking log.
//! * [`metrics`]: power factor, human-to-robot torque scaling, and beam
//!   deflection scaling.
//! * [`gait`]: footstep plans, ZMP references, the closed-form LIPM centre of
//!   mass trajectory, phase clock and balance PD laws.
//! * [`io`]: parameter, bounds, inventory and trace file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator;
pub mod error;
pub mod gait;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod sysid;
pub mod testbed;
pub mod trace;

pub use actuator::{
    net_torque, pd_torque, resistance_torque, simulate_tracking, step, torque_limit, ControlCommand,
    ExternalTorque, GainUnits, JointState, LoadConfig, PdGains,
};
pub use error::{Error, Result};
pub use gait::{
    com_pd, com_trajectory, phase_signal, plan_footsteps, torso_pitch_pd, zmp_reference, BalanceGains,
    ComTrajectory, FootstepPlan, GaitPhase, VelocityCommand, ZmpReference,
};
pub use metrics::{power_factor, relative_deflection, scale_torque, TorqueInventory};
pub use params::{ActuatorParams, MotorFamily};
pub use sysid::{default_bounds, fit_parameters, tracking_error, FitConfig, FitResult, ParamBounds};
pub use testbed::{
    estimate_armature, fit_friction_damping, gen_chirp, run_backdrive, run_spindown, BackdriveSample,
    ChirpSpec, SpindownTrace,
};
pub use trace::{SetpointSeries, Trace, TraceRow};
