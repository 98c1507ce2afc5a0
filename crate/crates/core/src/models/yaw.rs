//! Yaw: the robot as a differential drive, both bodies as single rigid bodies.

use crate::config::PhysicalParams;
use crate::error::{ensure_finite, Result, TeleopError};
use crate::state::RobotState;

/// Body moment produced by a differential wheel torque `tau_y`.
pub fn wheel_moment(tau_y: f64, params: &PhysicalParams) -> f64 {
    params.d / params.r_w * tau_y
}

/// `φ̈_R = ((d/r_w)·τ_y + M_ext) / I_zR`.
pub fn yaw_acceleration(tau_y: f64, m_ext: f64, params: &PhysicalParams) -> f64 {
    (wheel_moment(tau_y, params) + m_ext) / params.i_zr
}

/// Advance yaw under a torque held constant over `dt` (exact for that input).
pub fn yaw_diffdrive_dynamics(
    state: &RobotState,
    tau_y: f64,
    m_ext: f64,
    params: &PhysicalParams,
    dt: f64,
) -> Result<RobotState> {
    ensure_finite("yaw step", &[tau_y, m_ext, dt])?;
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(TeleopError::Domain(format!("dt must lie in (0, 0.01], got {dt}")));
    }
    let acc = yaw_acceleration(tau_y, m_ext, params);
    Ok(RobotState {
        phi: state.phi + state.phidot * dt + 0.5 * acc * dt * dt,
        phidot: state.phidot + acc * dt,
        ..*state
    })
}

/// Single-rigid-body yaw: `I_z·φ̈ = M_net`.
pub fn srb_yaw_acceleration(inertia: f64, net_moment: f64) -> f64 {
    net_moment / inertia
}
