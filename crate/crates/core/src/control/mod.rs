//! Tracking controllers for every mode and the per-tick torque command.

pub mod arm;
pub mod care;
pub mod locomotion;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;
use crate::models::arm::{arm_fk, gravity_torque};
use crate::retarget::{ArmSetpoint, ModeState, SagittalSetpoint, Setpoints, YawSetpoint};
use crate::state::{JointVec, PilotInput, RobotState};

pub use arm::{blend_torque, impedance_control, joint_pd_control, null_space_projector};
pub use care::{lqr, solve_care};
pub use locomotion::{
    dcm_gain, dcm_mode_control, synthesize_velocity_lqr, velocity_mode_control, yaw_ff_torque,
    yaw_p_control, DcmGain, VelocityLqr,
};

/// Clamp to `±limit`, reporting whether clipping happened.
pub fn saturate(v: f64, limit: f64) -> (f64, bool) {
    if v > limit {
        (limit, true)
    } else if v < -limit {
        (-limit, true)
    } else {
        (v, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SaturationFlags {
    pub wheel: bool,
    pub yaw: bool,
    /// Any joint of that arm clipped.
    pub arm: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorqueCommand {
    pub wheel_force: f64,
    pub tau_y: f64,
    pub tau_arm: [JointVec; 2],
    pub saturated: SaturationFlags,
}

impl TorqueCommand {
    pub fn is_finite(&self) -> bool {
        self.wheel_force.is_finite()
            && self.tau_y.is_finite()
            && self.tau_arm.iter().flatten().all(|v| v.is_finite())
    }
}

/// Gains synthesized once per session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub lqr: VelocityLqr,
    pub dcm: DcmGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub command: TorqueCommand,
    /// Null-space projector of that arm needed damping this tick.
    pub projector_damped: [bool; 2],
}

impl Controller {
    pub fn new(cfg: &Config) -> Result<Self> {
        Ok(Self {
            lqr: synthesize_velocity_lqr(&cfg.physical, &cfg.control)?,
            dcm: dcm_gain(&cfg.physical, &cfg.control)?,
        })
    }

    /// Torques for the active modes. `yaw_moment_ff` is an extra body moment
    /// the wheels should add (converted through the differential drive).
    pub fn compute(
        &self,
        robot: &RobotState,
        setpoints: &Setpoints,
        modes: &ModeState,
        input: &PilotInput,
        yaw_moment_ff: f64,
        cfg: &Config,
    ) -> ControlOutput {
        let gains = &cfg.control;
        let wheel = match setpoints.sagittal {
            SagittalSetpoint::Velocity { x_des, xdot_des } => {
                velocity_mode_control(robot, x_des, xdot_des, &self.lqr.k)
            }
            SagittalSetpoint::Dcm { xi_des } => dcm_mode_control(robot, xi_des, &self.dcm),
        };
        let yaw = match setpoints.yaw {
            YawSetpoint::Position { phi_des, phidot_des } => {
                yaw_p_control(robot, phi_des, phidot_des, gains)
            }
            YawSetpoint::Acceleration { .. } => yaw_ff_torque(input.phi_h, &cfg.mapping, &cfg.physical),
        } + cfg.physical.r_w / cfg.physical.d * yaw_moment_ff;

        let mut out = ControlOutput::default();
        let (wheel, wheel_sat) = saturate(wheel, gains.wheel_force_limit);
        let (yaw, yaw_sat) = saturate(yaw, gains.yaw_torque_limit);
        out.command.wheel_force = wheel;
        out.command.tau_y = yaw;
        out.command.saturated.wheel = wheel_sat;
        out.command.saturated.yaw = yaw_sat;

        let model = &cfg.robot_arm;
        for i in 0..2 {
            let arm = &robot.arms[i];
            let q_des = setpoints.arm[i].q_des();
            let alpha = modes.alpha;
            let tau_p = if alpha < 1.0 {
                let pd = joint_pd_control(&arm.q, &arm.qd, &q_des, gains);
                if gains.gravity_comp {
                    pd + gravity_torque(&arm.q, model)
                } else {
                    pd
                }
            } else {
                Vector4::zeros()
            };
            let tau_d = if alpha > 0.0 {
                let x_des = match setpoints.arm[i] {
                    ArmSetpoint::Cartesian { x_des, .. } => x_des,
                    ArmSetpoint::Joint { q_des } => arm_fk(&q_des, model),
                };
                let imp = impedance_control(&arm.q, &arm.qd, &x_des, Some(&q_des), model, gains);
                out.projector_damped[i] = imp.damped;
                imp.tau
            } else {
                Vector4::zeros()
            };
            let tau = blend_torque(&tau_p, &tau_d, alpha);
            for k in 0..4 {
                let (v, sat) = saturate(tau[k], gains.joint_torque_limit);
                out.command.tau_arm[i][k] = v;
                out.command.saturated.arm[i] |= sat;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retarget::retarget_tick;

    #[test]
    fn saturation_is_idempotent_and_flagged() {
        assert_eq!(saturate(50.0, 40.0), (40.0, true));
        assert_eq!(saturate(-50.0, 40.0), (-40.0, true));
        assert_eq!(saturate(10.0, 40.0), (10.0, false));
        let once = saturate(123.0, 40.0).0;
        assert_eq!(saturate(once, 40.0).0, once);
    }

    #[test]
    fn rest_gives_zero_command() {
        let cfg = Config::default();
        let ctl = Controller::new(&cfg).unwrap();
        let robot = RobotState::default();
        let input = PilotInput::default();
        let (sp, modes) = retarget_tick(&input, &input, &robot, &ModeState::default(), &cfg);
        let out = ctl.compute(&robot, &sp, &modes, &input, 0.0, &cfg);
        assert_eq!(out.command.wheel_force, 0.0);
        assert_eq!(out.command.tau_y, 0.0);
        assert!(out.command.tau_arm.iter().flatten().all(|v| v.abs() < 1e-12));
    }
}
