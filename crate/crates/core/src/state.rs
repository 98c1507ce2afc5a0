//! Value types shared across the pipeline: modes, pilot input, robot state.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};

/// Precision (`P`) or dynamic (`D`) mapping for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    P,
    D,
}

impl Mode {
    /// Trigger encoding: 0 selects `P`, 1 selects `D`.
    pub fn from_trigger(bit: u8) -> Self {
        if bit == 0 {
            Mode::P
        } else {
            Mode::D
        }
    }

    pub fn as_trigger(self) -> u8 {
        match self {
            Mode::P => 0,
            Mode::D => 1,
        }
    }
}

/// Arm index; arrays of per-arm data are ordered `[right, left]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right = 0,
    Left = 1,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Right, Side::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    /// +1 for the left arm, −1 for the right (lateral sign in the heading frame).
    pub fn lateral_sign(self) -> f64 {
        match self {
            Side::Right => -1.0,
            Side::Left => 1.0,
        }
    }
}

pub type JointVec = [f64; 4];

/// Human-side state as delivered by the HMI (or a script).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PilotInput {
    pub theta_h: f64,
    pub thetadot_h: f64,
    pub phi_h: f64,
    pub phidot_h: f64,
    /// Yaw moment the pilot applies to the forceplate, N·m.
    pub m_zh: f64,
    pub q_ah: [JointVec; 2],
    pub u_s: Mode,
    pub u_y: Mode,
    pub u_a: Mode,
    pub timestamp: f64,
}

impl PilotInput {
    /// Reject non-finite fields and clamp torso yaw to the HMI range.
    pub fn sanitized(mut self, yaw_limit: f64) -> Result<Self> {
        ensure_finite(
            "pilot input",
            &[
                self.theta_h,
                self.thetadot_h,
                self.phi_h,
                self.phidot_h,
                self.m_zh,
                self.timestamp,
            ],
        )?;
        ensure_finite("pilot arm angles", &self.q_ah.concat())?;
        self.phi_h = self.phi_h.clamp(-yaw_limit, yaw_limit);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    pub q: JointVec,
    pub qd: JointVec,
}

/// Reduced-order robot state: cart-pole sagittal states, yaw, and both arms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub xdot: f64,
    pub theta: f64,
    pub thetadot: f64,
    pub phi: f64,
    pub phidot: f64,
    pub arms: [ArmState; 2],
}

impl RobotState {
    pub fn is_finite(&self) -> bool {
        [
            self.x,
            self.xdot,
            self.theta,
            self.thetadot,
            self.phi,
            self.phidot,
        ]
        .iter()
        .chain(self.arms.iter().flat_map(|a| a.q.iter().chain(a.qd.iter())))
        .all(|v| v.is_finite())
    }
}
