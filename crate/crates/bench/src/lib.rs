//! Shared fixtures for the servo-sysid benchmarks.

use servo_sysid::gait::{DEFAULT_STANCE_WIDTH, DEFAULT_STEP_DURATION};
use servo_sysid::*;

/// Setpoints of the standard 10 s identification chirp.
pub fn identification_setpoints() -> SetpointSeries {
    gen_chirp(&ChirpSpec::identification()).expect("valid chirp")
}

/// ZMP reference for a forward walk of `steps` steps sampled at `dt`.
pub fn walking_zmp(steps: usize, dt: f64) -> ZmpReference {
    let cmd = VelocityCommand {
        vx: 0.1,
        vy: 0.0,
        wz: 0.2,
    };
    let plan = plan_footsteps(cmd, steps, DEFAULT_STEP_DURATION, DEFAULT_STANCE_WIDTH).expect("valid plan");
    zmp_reference(&plan, dt).expect("valid reference")
}
