//! Closed-loop pilots used to author the shipped traces. They watch the
//! world the way a pilot watches the first-person view, and only act through
//! ordinary pilot inputs, so their recorded traces replay open-loop.

use nalgebra::{Vector3, Vector4};

use super::pilot::{PilotEvent, PilotSource, SessionView};
use crate::config::Config;
use crate::error::Result;
use crate::models::arm::{arm_fk, arm_jacobian, ArmModel};
use crate::state::{JointVec, Mode, PilotInput};

/// Joints that put the hand at `target` (shoulder frame), by damped least
/// squares from `seed`.
pub fn hand_ik(target: &Vector3<f64>, seed: &JointVec, model: &ArmModel) -> JointVec {
    let mut q = *seed;
    for _ in 0..200 {
        let err = target - arm_fk(&q, model);
        if err.norm() < 1e-12 {
            break;
        }
        let j = arm_jacobian(&q, model);
        let jjt = j * j.transpose() + nalgebra::Matrix3::identity() * 1e-6;
        let step: Vector4<f64> = j.transpose() * jjt.try_inverse().unwrap_or_default() * err;
        q = model.clamp_joints((Vector4::from(q) + step).into());
    }
    q
}

/// Arm seed with the elbow bent and the hand forward.
const ARM_SEED: JointVec = [0.0, 1.2, 0.0, 0.6];

/// Tuning of the box-pushing pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxExpertParams {
    /// Hand target while approaching, shoulder frame.
    pub reach: [f64; 3],
    /// Extra hand offset while pushing (forward into the box and up for lift).
    pub push_offset: [f64; 3],
    pub approach_speed: f64,
    pub push_speed: f64,
    pub final_speed: f64,
    /// Box x beyond which the pilot slows down.
    pub slow_x: f64,
    pub kp: f64,
    pub ki: f64,
    pub max_lean: f64,
    /// Robot pitch above which the pilot eases off.
    pub pitch_guard: f64,
    /// Lean rate limit, rad/s.
    pub lean_rate: f64,
    /// Seconds to blend arms into the pushing pose.
    pub arm_ramp: f64,
}

impl Default for BoxExpertParams {
    fn default() -> Self {
        Self {
            reach: [0.2, 0.0, -0.1],
            push_offset: [0.08, 0.0, 0.1],
            approach_speed: 0.15,
            push_speed: 0.2,
            final_speed: 0.1,
            slow_x: 1.4,
            kp: 0.4,
            ki: 0.4,
            max_lean: 0.45,
            pitch_guard: 0.38,
            lean_rate: 1.0,
            arm_ramp: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Settle,
    Approach,
    Push,
}

/// Approach in the dynamic sagittal mode, then push with compliant arms
/// pressed in and lifting, regulating speed by lean.
pub struct BoxExpert {
    pub params: BoxExpertParams,
    cfg: Config,
    phase: Phase,
    lean: f64,
    integral: f64,
    push_start: f64,
    q_reach: JointVec,
}

impl BoxExpert {
    pub fn new(cfg: &Config, params: BoxExpertParams) -> Self {
        let model = &cfg.robot_arm;
        let reach = Vector3::from(params.reach);
        let q_reach = hand_ik(&reach, &ARM_SEED, model);
        Self {
            params,
            cfg: cfg.clone(),
            phase: Phase::Settle,
            lean: 0.0,
            integral: 0.0,
            push_start: 0.0,
            q_reach,
        }
    }

    /// Input at t = 0: everything in P with arms at the approach pose.
    pub fn first_input(&self) -> PilotInput {
        PilotInput {
            q_ah: [self.q_reach, mirror(self.q_reach)],
            ..Default::default()
        }
    }

    fn speed_target(&self, box_x: f64) -> f64 {
        match self.phase {
            Phase::Settle => 0.0,
            Phase::Approach => self.params.approach_speed,
            Phase::Push if box_x > self.params.slow_x => self.params.final_speed,
            Phase::Push => self.params.push_speed,
        }
    }
}

/// Left arm joints mirroring a right arm pose across the sagittal plane.
pub fn mirror(q: JointVec) -> JointVec {
    [-q[0], q[1], -q[2], q[3]]
}

impl PilotSource for BoxExpert {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent> {
        let dt = self.cfg.sim.control_dt;
        let p = self.params;
        let t = view.t;
        let robot = &view.world.robot;
        let (box_x, wall) = view
            .world
            .box_world
            .map_or((0.0, 0.0), |b| (b.body.pose[0], view.world.interaction.wall_normal));
        let both = view.contact == 3;

        self.phase = match self.phase {
            Phase::Settle if t >= 0.5 => Phase::Approach,
            Phase::Approach if both => {
                self.push_start = t;
                Phase::Push
            }
            other => other,
        };

        let v_target = self.speed_target(box_x);
        let err = v_target - robot.xdot;
        let mut lean_target = 0.0;
        if self.phase == Phase::Push && wall <= 0.0 {
            self.integral = (self.integral + p.ki * err * dt).clamp(0.0, p.max_lean);
        }
        if self.phase != Phase::Settle {
            lean_target = (p.kp * err + self.integral).clamp(-0.1, p.max_lean);
            lean_target -= 2.0 * (robot.theta - p.pitch_guard).max(0.0);
        }
        let max_step = p.lean_rate * dt;
        self.lean += (lean_target - self.lean).clamp(-max_step, max_step);

        let s = if self.phase == Phase::Push {
            ((t - self.push_start) / p.arm_ramp).clamp(0.0, 1.0)
        } else {
            0.0
        };
        // Hands pressed in and raised, also making up for the shoulder
        // dropping as the robot leans.
        let drop = self.cfg.sim.shoulder_height * (1.0 - robot.theta.cos());
        let target = Vector3::from(p.reach) + Vector3::from(p.push_offset) * s + Vector3::new(0.0, 0.0, drop * s);
        let q = hand_ik(&target, &self.q_reach, &self.cfg.robot_arm);
        Ok(PilotEvent::Input(PilotInput {
            theta_h: self.lean,
            q_ah: [q, mirror(q)],
            u_s: if self.phase == Phase::Settle { Mode::P } else { Mode::D },
            u_y: Mode::P,
            u_a: if t >= 0.25 { Mode::D } else { Mode::P },
            timestamp: t,
            ..Default::default()
        }))
    }
}

/// Constant-pose pilot: fixed lean, modes and arm pose.
pub struct HoldPilot {
    pub input: PilotInput,
}

impl HoldPilot {
    pub fn new(modes: [Mode; 3], reach: [f64; 3], cfg: &Config) -> Self {
        let q = hand_ik(&Vector3::from(reach), &ARM_SEED, &cfg.robot_arm);
        Self {
            input: PilotInput {
                q_ah: [q, mirror(q)],
                u_s: modes[0],
                u_y: modes[1],
                u_a: modes[2],
                ..Default::default()
            },
        }
    }
}

impl PilotSource for HoldPilot {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent> {
        Ok(PilotEvent::Input(PilotInput {
            timestamp: view.t,
            ..self.input
        }))
    }
}
