//! Hybrid retargeting: the sagittal, yaw and arm mappings with their P/D mode
//! transitions and the manipulation blend parameter.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::{Config, MappingGains, PhysicalParams, BLEND_SPAN};
use crate::models::arm::{arm_fk, arm_ik_spherical, ArmModel};
use crate::models::pendulum::{dcm, natural_frequency};
use crate::state::{JointVec, Mode, PilotInput, RobotState, Side};

/// Snap distance for the blend ramp, so accumulated rounding never leaves α
/// a hair short of its target.
const ALPHA_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub mode_s: Mode,
    pub mode_y: Mode,
    pub mode_a: Mode,
    /// Integrated desired base position (sagittal P).
    pub x_des: f64,
    /// Yaw offset (yaw P).
    pub phi_offset: f64,
    /// Manipulation blend: 0 is joint control, 1 is impedance control.
    pub alpha: f64,
    /// Ramp speed of `alpha`, 1/s.
    pub alpha_rate: f64,
    /// Last first-shoulder-joint solution per arm, held through singularities.
    pub prev_q0: [f64; 2],
}

impl Default for ModeState {
    fn default() -> Self {
        Self {
            mode_s: Mode::P,
            mode_y: Mode::P,
            mode_a: Mode::P,
            x_des: 0.0,
            phi_offset: 0.0,
            alpha: 0.0,
            alpha_rate: 1.0 / BLEND_SPAN,
            prev_q0: [0.0; 2],
        }
    }
}

impl ModeState {
    /// Initial state aligned with the robot so the first P tick is at rest.
    pub fn aligned_with(robot: &RobotState, blend_span: f64) -> Self {
        Self {
            x_des: robot.x,
            phi_offset: robot.phi,
            alpha_rate: 1.0 / blend_span,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SagittalSetpoint {
    Velocity { x_des: f64, xdot_des: f64 },
    Dcm { xi_des: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum YawSetpoint {
    Position { phi_des: f64, phidot_des: f64 },
    Acceleration { phiddot_des: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmSetpoint {
    Joint { q_des: JointVec },
    /// Hand target plus the joint posture used by the null-space task.
    Cartesian { x_des: Vector3<f64>, q_des: JointVec },
}

impl ArmSetpoint {
    pub fn q_des(&self) -> JointVec {
        match *self {
            ArmSetpoint::Joint { q_des } | ArmSetpoint::Cartesian { q_des, .. } => q_des,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoints {
    pub sagittal: SagittalSetpoint,
    pub yaw: YawSetpoint,
    pub arm: [ArmSetpoint; 2],
    pub ik_singular: [bool; 2],
}

/// Sagittal mapping. In P the returned `x_des` is the integrator value at the
/// start of the tick; the integrator then advances by `ẋ_des·dt`.
pub fn pi_s(
    input: &PilotInput,
    state: &ModeState,
    gains: &MappingGains,
    params: &PhysicalParams,
    dt: f64,
) -> (SagittalSetpoint, ModeState) {
    match state.mode_s {
        Mode::P => {
            let xdot_des = gains.k_v * input.theta_h;
            let sp = SagittalSetpoint::Velocity {
                x_des: state.x_des,
                xdot_des,
            };
            let next = ModeState {
                x_des: state.x_des + xdot_des * dt,
                ..*state
            };
            (sp, next)
        }
        Mode::D => {
            // Parameters are validated at load, so h_h and g are positive.
            let omega_h = natural_frequency(params.h_h, params.g).unwrap_or(f64::NAN);
            let xi_des = dcm(input.theta_h, input.thetadot_h, omega_h)
                .map(|v| v.xi)
                .unwrap_or(f64::NAN);
            (SagittalSetpoint::Dcm { xi_des }, *state)
        }
    }
}

pub fn transition_sagittal(state: &ModeState, robot: &RobotState, new_mode: Mode) -> ModeState {
    if new_mode == state.mode_s {
        return *state;
    }
    let mut next = ModeState {
        mode_s: new_mode,
        ..*state
    };
    if new_mode == Mode::P {
        next.x_des = robot.x;
    }
    next
}

/// Bound `x_des − x_R` to the anti-windup band, moving the integrator itself.
pub fn clamp_position_error(state: &ModeState, robot: &RobotState, gains: &MappingGains) -> ModeState {
    let band = gains.x_error_clamp;
    ModeState {
        x_des: state.x_des.clamp(robot.x - band, robot.x + band),
        ..*state
    }
}

pub fn pi_y(input: &PilotInput, state: &ModeState, gains: &MappingGains) -> (YawSetpoint, ModeState) {
    let sp = match state.mode_y {
        Mode::P => YawSetpoint::Position {
            phi_des: gains.k_y * input.phi_h + state.phi_offset,
            phidot_des: gains.k_y * input.phidot_h,
        },
        Mode::D => YawSetpoint::Acceleration {
            phiddot_des: gains.k_m * input.phi_h,
        },
    };
    (sp, *state)
}

/// `input` is the last pilot sample seen before the switch.
pub fn transition_yaw(
    state: &ModeState,
    robot: &RobotState,
    input: &PilotInput,
    new_mode: Mode,
    gains: &MappingGains,
) -> ModeState {
    if new_mode == state.mode_y {
        return *state;
    }
    let mut next = ModeState {
        mode_y: new_mode,
        ..*state
    };
    if new_mode == Mode::P {
        next.phi_offset = robot.phi - gains.k_y * input.phi_h;
    }
    next
}

pub fn transition_arm(state: &ModeState, new_mode: Mode) -> ModeState {
    ModeState {
        mode_a: new_mode,
        ..*state
    }
}

/// Arm mapping, solved independently per arm.
pub fn pi_a(
    input: &PilotInput,
    human: &ArmModel,
    robot: &ArmModel,
    state: &ModeState,
) -> ([ArmSetpoint; 2], [bool; 2], ModeState) {
    let mut next = *state;
    let mut singular = [false; 2];
    let mut out = [ArmSetpoint::Joint { q_des: [0.0; 4] }; 2];
    for side in Side::BOTH {
        let i = side.index();
        let sol = arm_ik_spherical(&input.q_ah[i], human, robot, state.prev_q0[i]);
        next.prev_q0[i] = sol.q[0];
        singular[i] = sol.singular;
        out[i] = match state.mode_a {
            Mode::P => ArmSetpoint::Joint { q_des: sol.q },
            Mode::D => ArmSetpoint::Cartesian {
                x_des: arm_fk(&sol.q, robot),
                q_des: sol.q,
            },
        };
    }
    (out, singular, next)
}

/// Move α linearly toward its mode target (1 for D, 0 for P).
pub fn blend_step(state: &ModeState, dt: f64) -> ModeState {
    let target = match state.mode_a {
        Mode::P => 0.0,
        Mode::D => 1.0,
    };
    let step = state.alpha_rate * dt;
    let mut alpha = if state.alpha < target {
        (state.alpha + step).min(target)
    } else {
        (state.alpha - step).max(target)
    };
    if (alpha - target).abs() < ALPHA_SNAP {
        alpha = target;
    }
    ModeState {
        alpha: alpha.clamp(0.0, 1.0),
        ..*state
    }
}

/// One control tick of retargeting: mode edges, the three mappings, the
/// anti-windup clamp and the blend ramp. `prev` is the previous tick's input.
pub fn retarget_tick(
    input: &PilotInput,
    prev: &PilotInput,
    robot: &RobotState,
    state: &ModeState,
    cfg: &Config,
) -> (Setpoints, ModeState) {
    let dt = cfg.sim.control_dt;
    let mut s = transition_sagittal(state, robot, input.u_s);
    s = transition_yaw(&s, robot, prev, input.u_y, &cfg.mapping);
    s = transition_arm(&s, input.u_a);
    if s.mode_s == Mode::P {
        s = clamp_position_error(&s, robot, &cfg.mapping);
    }
    let (sagittal, s) = pi_s(input, &s, &cfg.mapping, &cfg.physical, dt);
    let (yaw, s) = pi_y(input, &s, &cfg.mapping);
    let (arm, ik_singular, s) = pi_a(input, &cfg.human_arm, &cfg.robot_arm, &s);
    let s = blend_step(&s, dt);
    (
        Setpoints {
            sagittal,
            yaw,
            arm,
            ik_singular,
        },
        s,
    )
}
