//! Base controllers: velocity-mode LQR, DCM-mode tracking and yaw.

use nalgebra::{DMatrix, Matrix4, RowVector4};
use serde::{Deserialize, Serialize};

use super::care::lqr;
use crate::config::{ControllerGains, MappingGains, PhysicalParams};
use crate::error::{Result, TeleopError};
use crate::models::pendulum::{cartpole_linear_dynamics, natural_frequency};
use crate::state::RobotState;

/// Synthesized velocity-mode gain and its Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityLqr {
    pub k: RowVector4<f64>,
    pub p: Matrix4<f64>,
}

pub fn synthesize_velocity_lqr(params: &PhysicalParams, gains: &ControllerGains) -> Result<VelocityLqr> {
    let (a, b) = cartpole_linear_dynamics(params)?;
    let a = DMatrix::from_column_slice(4, 4, a.as_slice());
    let b = DMatrix::from_column_slice(4, 1, b.as_slice());
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&gains.lqr_q));
    let r = DMatrix::from_element(1, 1, gains.lqr_r);
    let (k, p) = lqr(&a, &b, &q, &r)?;
    Ok(VelocityLqr {
        k: RowVector4::from_iterator(k.iter().copied()),
        p: Matrix4::from_column_slice(p.as_slice()),
    })
}

/// `u = −K·[x − x_des, θ, ẋ − ẋ_des, θ̇]`.
pub fn velocity_mode_control(robot: &RobotState, x_des: f64, xdot_des: f64, k: &RowVector4<f64>) -> f64 {
    let e = nalgebra::Vector4::new(robot.x - x_des, robot.theta, robot.xdot - xdot_des, robot.thetadot);
    -(k * e)[0]
}

/// Scalar DCM feedback gain plus the feedforward that holds a constant lean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmGain {
    pub k_dcm: f64,
    /// Wheel force per radian of commanded DCM that holds that lean.
    pub feedforward: f64,
    pub omega_r: f64,
}

/// Place the slow pole of the linearized DCM pitch loop at `−gains.dcm_pole`.
///
/// With `u = K·ξ`, the pitch loop `θ̈ = a·θ + b·u` has characteristic
/// polynomial `s² + (κ/ω)s + (κ − a)` where `κ = −b·K`.
pub fn dcm_gain(params: &PhysicalParams, gains: &ControllerGains) -> Result<DcmGain> {
    let (a_mat, b_vec) = cartpole_linear_dynamics(params)?;
    let a = a_mat[(3, 1)];
    let b = b_vec[3];
    let omega = natural_frequency(params.h_r, params.g)?;
    let p = gains.dcm_pole;
    if p >= omega {
        return Err(TeleopError::Synthesis(format!(
            "DCM pole {p} must be slower than the robot natural frequency {omega}"
        )));
    }
    let kappa = (a - p * p) / (1.0 - p / omega);
    if kappa <= a {
        return Err(TeleopError::Synthesis("DCM placement is not stabilizing".into()));
    }
    Ok(DcmGain {
        k_dcm: -kappa / b,
        feedforward: -a / b,
        omega_r: omega,
    })
}

/// `u = K_DCM·(ξ_R − ξ_des) + u_ff·ξ_des`; independent of `x` and `ẋ`.
pub fn dcm_mode_control(robot: &RobotState, xi_des: f64, gain: &DcmGain) -> f64 {
    let xi_r = robot.theta + robot.thetadot / gain.omega_r;
    gain.k_dcm * (xi_r - xi_des) + gain.feedforward * xi_des
}

pub fn yaw_p_control(robot: &RobotState, phi_des: f64, phidot_des: f64, gains: &ControllerGains) -> f64 {
    gains.kp_yaw * (phi_des - robot.phi) + gains.kd_yaw * (phidot_des - robot.phidot)
}

/// Wheel torque giving `φ̈_R = k_m·φ_H` on the differential drive.
pub fn yaw_ff_torque(phi_h: f64, gains: &MappingGains, params: &PhysicalParams) -> f64 {
    params.r_w * params.i_zr / params.d * gains.k_m * phi_h
}
