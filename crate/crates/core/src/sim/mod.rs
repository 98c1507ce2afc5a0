//! Deterministic fixed-step world: the robot plant, a heavy box against a wall,
//! and a shared bar held with an external agent.

pub mod agent;
pub mod box_body;
pub mod scenario;

use nalgebra::{Rotation2, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::config::{Config, SimParams};
use crate::control::TorqueCommand;
use crate::error::{Result, TeleopError};
use crate::models::arm::{arm_fk, arm_jacobian, arm_rk4_step, ArmModel};
use crate::models::pendulum::cartpole_nonlinear_step;
use crate::models::yaw::yaw_diffdrive_dynamics;
use crate::state::{ArmState, RobotState, Side};

pub use agent::{agent_step, AgentMode, ExternalAgent, ImpliedMotion, SharedObject, Wrench};
pub use box_body::{box_contact, box_friction_step, wall_contact, Anchor, BoxBody, Wall};
pub use scenario::{evaluate_scenario, DriftInjection, Evaluation, InitialRobot, ObjectSpec, Scenario, SlotRegion, SuccessPredicate, FALL_PITCH};

/// Box task: the box, the wall it must be pushed against, and per-hand
/// stick-slip anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxWorld {
    pub body: BoxBody,
    pub wall: Wall,
    pub anchors: [Anchor; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectWorld {
    pub object: SharedObject,
    pub agent: ExternalAgent,
}

/// Interaction summary of the last physics step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Interaction {
    /// Environment force on each hand, heading frame, `[right, left]`.
    pub hand_forces: [[f64; 3]; 2],
    /// Hands relative to the base, heading frame.
    pub hand_points: [[f64; 3]; 2],
    /// Sagittal resultant of the hand forces.
    pub f_ext_x: f64,
    /// Yaw moment of the hand forces about the base.
    pub m_ext_z: f64,
    pub wall_normal: f64,
    /// Net upward hand force on the box.
    pub lift: f64,
    pub agent_wrench: Wrench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub t: f64,
    pub robot: RobotState,
    /// Base position on the floor, world frame. `robot.x` is odometry along
    /// the heading and is integrated into this.
    pub base: [f64; 2],
    pub box_world: Option<BoxWorld>,
    pub object: Option<ObjectWorld>,
    pub interaction: Interaction,
}

/// Hand position and velocity relative to the base, heading frame.
pub fn hand_in_heading(robot: &RobotState, side: Side, arm: &ArmState, model: &ArmModel, sim: &SimParams, r_w: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = robot.theta.sin_cos();
    let h = sim.shoulder_height;
    let shoulder = Vector3::new(sim.shoulder_x + h * s, side.lateral_sign() * sim.shoulder_y, r_w + h * c);
    let p = shoulder + arm_fk(&arm.q, model);
    let v_shoulder = Vector3::new(robot.xdot + h * c * robot.thetadot, 0.0, -h * s * robot.thetadot);
    let v = v_shoulder + arm_jacobian(&arm.q, model) * Vector4::from(arm.qd);
    (p, v)
}

fn rotate(phi: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let xy = Rotation2::new(phi) * v.xy();
    Vector3::new(xy.x, xy.y, v.z)
}

impl World {
    pub fn new(robot: RobotState, base: [f64; 2]) -> Self {
        Self {
            t: 0.0,
            robot,
            base,
            box_world: None,
            object: None,
            interaction: Interaction::default(),
        }
    }

    /// Hand position and velocity in the world frame.
    pub fn hand_world(&self, side: Side, arm: &ArmState, cfg: &Config) -> (Vector3<f64>, Vector3<f64>) {
        let (p, v) = hand_in_heading(&self.robot, side, arm, &cfg.robot_arm, &cfg.sim, cfg.physical.r_w);
        let phi = self.robot.phi;
        let pw = rotate(phi, &p);
        let spin = Vector3::new(-self.robot.phidot * pw.y, self.robot.phidot * pw.x, 0.0);
        let vw = rotate(phi, &v) + spin;
        (pw + Vector3::new(self.base[0], self.base[1], 0.0), vw)
    }

    pub fn hands_world(&self, cfg: &Config) -> ([Vector3<f64>; 2], [Vector3<f64>; 2]) {
        let r = self.hand_world(Side::Right, &self.robot.arms[0], cfg);
        let l = self.hand_world(Side::Left, &self.robot.arms[1], cfg);
        ([r.0, l.0], [r.1, l.1])
    }

    /// Attach a bar gripped at the current hand positions, extending `length`
    /// forward of them; the agent grips the far end.
    pub fn attach_object(&mut self, mass: f64, length: f64, agent: ExternalAgent, cfg: &Config) {
        let (hands, _) = self.hands_world(cfg);
        let phi = self.robot.phi;
        let mid = (hands[0].xy() + hands[1].xy()) * 0.5;
        let fwd = Rotation2::new(phi) * Vector2::x();
        let center = mid + fwd * (length * 0.5);
        let to_local = |p: Vector2<f64>| {
            let d = Rotation2::new(-phi) * (p - center);
            [d.x, d.y]
        };
        let robot_grips = [to_local(hands[0].xy()), to_local(hands[1].xy())];
        let agent_grips = robot_grips.map(|[x, y]| [x + length, y]);
        let inertia = mass * length * length / 12.0;
        let mut agent = agent;
        for w in &mut agent.path {
            let d = Rotation2::new(phi) * Vector2::new(w.pose[0], w.pose[1]);
            w.pose = [center.x + d.x, center.y + d.y, phi + w.pose[2]];
        }
        let object = SharedObject {
            mass,
            inertia,
            pose: [center.x, center.y, phi],
            vel: [0.0; 3],
            robot_grips,
            agent_grips,
        };
        self.object = Some(ObjectWorld { object, agent });
    }
}

fn grip_force(object: &SharedObject, i: usize, hand: &Vector3<f64>, hand_vel: &Vector3<f64>, sim: &SimParams) -> Vector3<f64> {
    let local = &object.robot_grips[i];
    let f = (object.grip_world(local) - hand.xy()) * sim.grip_k + (object.grip_velocity(local) - hand_vel.xy()) * sim.grip_b;
    Vector3::new(f.x, f.y, 0.0)
}

/// Object pose and velocity implied by rigidly attaching it to the hands.
fn implied_motion(object: &SharedObject, hands: &[Vector3<f64>; 2], hand_vel: &[Vector3<f64>; 2]) -> ImpliedMotion {
    let g0 = Vector2::from(object.robot_grips[0]);
    let g1 = Vector2::from(object.robot_grips[1]);
    let dh = hands[1].xy() - hands[0].xy();
    let dg = g1 - g0;
    let yaw = dh.y.atan2(dh.x) - dg.y.atan2(dg.x);
    let mid = (hands[0].xy() + hands[1].xy()) * 0.5;
    let center = mid - Rotation2::new(yaw) * ((g0 + g1) * 0.5);
    let dv = hand_vel[1].xy() - hand_vel[0].xy();
    let omega = (dh.x * dv.y - dh.y * dv.x) / dh.norm_squared();
    let v_mid = (hand_vel[0].xy() + hand_vel[1].xy()) * 0.5;
    let r = center - mid;
    let v = v_mid + Vector2::new(-omega * r.y, omega * r.x);
    ImpliedMotion {
        pose: [center.x, center.y, yaw],
        vel: [v.x, v.y, omega],
    }
}

/// Environment force on one hand (world frame) with the environment frozen;
/// anchors are read but not updated.
fn hand_force(world: &World, i: usize, hand: &Vector3<f64>, hand_vel: &Vector3<f64>, sim: &SimParams) -> Vector3<f64> {
    let mut f = Vector3::zeros();
    if let Some(bw) = &world.box_world {
        let mut anchors = bw.anchors;
        let mut hands = [Vector3::new(f64::NAN, 0.0, 0.0); 2];
        let mut vels = [Vector3::zeros(); 2];
        hands[i] = *hand;
        vels[i] = *hand_vel;
        f += box_contact(&hands, &vels, &bw.body, &mut anchors, sim)[i];
    }
    if let Some(ow) = &world.object {
        f += grip_force(&ow.object, i, hand, hand_vel, sim);
    }
    f
}

/// Advance the world by one physics step under a held torque command.
pub fn world_step(world: &World, cmd: &TorqueCommand, cfg: &Config, dt: f64) -> Result<World> {
    if !cmd.is_finite() {
        return Err(TeleopError::NonFinite("torque command"));
    }
    let sim = &cfg.sim;
    let params = &cfg.physical;
    let robot = &world.robot;
    let phi = robot.phi;
    let (hands, hand_vel) = world.hands_world(cfg);
    let mut next = world.clone();

    // Hand forces, world frame.
    let mut box_forces = [Vector3::zeros(); 2];
    if let Some(bw) = &mut next.box_world {
        box_forces = box_contact(&hands, &hand_vel, &bw.body, &mut bw.anchors, sim);
    }
    let mut grip_forces = [Vector3::zeros(); 2];
    let mut agent_wrench = [0.0; 3];
    if let Some(ow) = &world.object {
        for i in 0..2 {
            grip_forces[i] = grip_force(&ow.object, i, &hands[i], &hand_vel[i], sim);
        }
        let implied = implied_motion(&ow.object, &hands, &hand_vel);
        agent_wrench = agent_step(&ow.agent, &ow.object, Some(&implied), world.t);
    }
    let forces: [Vector3<f64>; 2] = [box_forces[0] + grip_forces[0], box_forces[1] + grip_forces[1]];
    let heading = forces.map(|f| rotate(-phi, &f));

    // Base: sagittal resultant at the CoM, yaw moment about the base.
    let mut points = [[0.0; 3]; 2];
    let mut f_ext_x = 0.0;
    let mut m_ext_z = 0.0;
    for side in Side::BOTH {
        let i = side.index();
        let (p, _) = hand_in_heading(robot, side, &robot.arms[i], &cfg.robot_arm, sim, params.r_w);
        points[i] = p.into();
        f_ext_x += heading[i].x;
        m_ext_z += p.x * heading[i].y - p.y * heading[i].x;
    }
    let mut stepped = cartpole_nonlinear_step(robot, cmd.wheel_force, f_ext_x, params, dt)?;
    stepped = yaw_diffdrive_dynamics(&stepped, cmd.tau_y, m_ext_z, params, dt)?;

    // Arms: environment force re-evaluated at each integrator stage.
    let model = &cfg.robot_arm;
    for side in Side::BOTH {
        let i = side.index();
        let tau_cmd = Vector4::from(cmd.tau_arm[i]);
        let arm = arm_rk4_step(&robot.arms[i], model, dt, |s| {
            let (p, v) = hand_in_heading(robot, side, s, model, sim, params.r_w);
            let pw = rotate(phi, &p) + Vector3::new(world.base[0], world.base[1], 0.0);
            let vw = rotate(phi, &v) + Vector3::new(-robot.phidot * (pw.y - world.base[1]), robot.phidot * (pw.x - world.base[0]), 0.0);
            let f = rotate(-phi, &hand_force(world, i, &pw, &vw, sim));
            tau_cmd + arm_jacobian(&s.q, model).transpose() * f
        });
        stepped.arms[i] = model.clamp_state(arm);
    }
    if !stepped.is_finite() {
        return Err(TeleopError::Domain("robot state diverged".into()));
    }
    let mid_phi = 0.5 * (phi + stepped.phi);
    let dx = stepped.x - robot.x;
    next.base = [world.base[0] + dx * mid_phi.cos(), world.base[1] + dx * mid_phi.sin()];
    next.robot = stepped;

    // Box: reaction of the hand forces plus the wall.
    let mut wall_normal = 0.0;
    let mut lift = 0.0;
    if let Some(bw) = &mut next.box_world {
        let body = bw.body;
        let center = body.center();
        let mut force = Vector2::zeros();
        let mut moment = 0.0;
        for i in 0..2 {
            let f = -box_forces[i];
            let r = hands[i].xy() - center;
            force += f.xy();
            moment += r.x * f.y - r.y * f.x;
            lift += f.z;
        }
        let (wf, wm, wn) = wall_contact(&body, &bw.wall);
        wall_normal = wn;
        bw.body = box_friction_step(&body, force + wf, moment + wm, lift, params.g, dt);
    }

    if let Some(ow) = &mut next.object {
        let obj = ow.object;
        let center = obj.center();
        let mut w = agent_wrench;
        for i in 0..2 {
            let f = -grip_forces[i];
            agent::accumulate(&mut w, &center, &hands[i].xy(), &f.xy());
        }
        ow.object = obj.step(&w, dt);
    }

    next.interaction = Interaction {
        hand_forces: heading.map(Into::into),
        hand_points: points,
        f_ext_x,
        m_ext_z,
        wall_normal,
        lift,
        agent_wrench,
    };
    next.t = world.t + dt;
    Ok(next)
}

/// Raw per-hand contact readings, `[right, left]`.
pub fn contact_sensors(interaction: &Interaction, threshold: f64) -> [bool; 2] {
    interaction.hand_forces.map(|f| Vector3::from(f).norm() > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_box(mass: f64, x: f64) -> BoxWorld {
        BoxWorld {
            body: BoxBody {
                mass,
                half: [0.2, 0.25],
                height: 0.8,
                mu_s: 0.4,
                mu_k: 0.3,
                pose: [x, 0.0, 0.0],
                vel: [0.0; 3],
            },
            wall: Wall { x: 3.0, k: 5000.0, b: 50.0 },
            anchors: [None; 2],
        }
    }

    #[test]
    fn equilibrium_is_kept() {
        let cfg = Config::default();
        let mut w = World::new(RobotState::default(), [0.0, 0.0]);
        for _ in 0..2000 {
            w = world_step(&w, &TorqueCommand::default(), &cfg, 1e-3).unwrap();
        }
        assert_eq!(w.robot, RobotState::default());
        assert_eq!(w.base, [0.0, 0.0]);
        assert_abs_diff_eq!(w.t, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_torque_is_rejected() {
        let cfg = Config::default();
        let w = World::new(RobotState::default(), [0.0, 0.0]);
        let cmd = TorqueCommand {
            wheel_force: f64::NAN,
            ..Default::default()
        };
        assert!(world_step(&w, &cmd, &cfg, 1e-3).is_err());
    }

    #[test]
    fn hand_velocity_matches_finite_difference() {
        let cfg = Config::default();
        let mut robot = RobotState {
            theta: 0.1,
            thetadot: 0.3,
            xdot: 0.2,
            phi: 0.4,
            phidot: -0.5,
            ..Default::default()
        };
        robot.arms[0] = ArmState {
            q: [0.3, 0.8, -0.2, 1.0],
            qd: [0.1, -0.2, 0.3, 0.4],
        };
        let w = World::new(robot, [1.0, 2.0]);
        let (p0, v) = w.hand_world(Side::Right, &robot.arms[0], &cfg);
        let h = 1e-7;
        let mut r2 = robot;
        r2.x += robot.xdot * h;
        r2.theta += robot.thetadot * h;
        r2.phi += robot.phidot * h;
        for k in 0..4 {
            r2.arms[0].q[k] += robot.arms[0].qd[k] * h;
        }
        let mut w2 = World::new(r2, [1.0 + robot.xdot * h * robot.phi.cos(), 2.0 + robot.xdot * h * robot.phi.sin()]);
        w2.robot.x = 0.0;
        let (p1, _) = w2.hand_world(Side::Right, &r2.arms[0], &cfg);
        assert!(((p1 - p0) / h - v).norm() < 1e-5);
    }

    #[test]
    fn box_impulse_matches_hand_forces() {
        let mut cfg = Config::default();
        cfg.sim.shoulder_x = 0.0;
        let mut robot = RobotState::default();
        // Arms forward, hands at the box's near face.
        robot.arms = [ArmState {
            q: [0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0],
            qd: [0.0; 4],
        }; 2];
        let mut w = World::new(robot, [0.0, 0.0]);
        let mut bw = test_box(2.0, 0.0);
        bw.body.mu_s = 0.0;
        bw.body.mu_k = 0.0;
        bw.body.pose[0] = 0.3 + 0.2 - 0.004;
        w.box_world = Some(bw);
        let mut impulse = Vector2::zeros();
        for _ in 0..300 {
            let before = w.clone();
            w = world_step(&before, &TorqueCommand::default(), &cfg, 1e-3).unwrap();
            let phi = before.robot.phi;
            for f in &w.interaction.hand_forces {
                impulse -= (Rotation2::new(phi) * Vector3::from(*f).xy()) * 1e-3;
            }
        }
        let body = w.box_world.unwrap().body;
        let momentum = Vector2::new(body.vel[0], body.vel[1]) * body.mass;
        assert!(impulse.x > 0.1);
        assert!((momentum - impulse).norm() <= 1e-4 * impulse.norm());
    }

    #[test]
    fn stiction_keeps_box_exactly_still() {
        let cfg = Config::default();
        let mut robot = RobotState::default();
        robot.arms = [ArmState {
            q: [0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0],
            qd: [0.0; 4],
        }; 2];
        let mut w = World::new(robot, [0.0, 0.0]);
        let mut bw = test_box(10.5, 0.0);
        bw.body.pose[0] = 0.3 + 0.2 - 0.001;
        w.box_world = Some(bw);
        let start = bw.body.pose;
        let mut peak: f64 = 0.0;
        // Hold the arms with gravity compensation; penalty force well below 41 N.
        for _ in 0..500 {
            let g = [0, 1].map(|i| crate::models::arm::gravity_torque(&w.robot.arms[i].q, &cfg.robot_arm));
            let cmd = TorqueCommand {
                tau_arm: g.map(Into::into),
                ..Default::default()
            };
            w = world_step(&w, &cmd, &cfg, 1e-3).unwrap();
            peak = peak.max(w.interaction.hand_forces[0][0].abs());
        }
        let body = w.box_world.unwrap().body;
        assert!(peak > 1.0);
        assert_eq!(body.pose, start);
        assert_eq!(body.vel, [0.0; 3]);
    }

    #[test]
    fn grip_forces_balance_on_bar() {
        let cfg = Config::default();
        let mut robot = RobotState::default();
        robot.arms = [ArmState {
            q: [0.0, 1.2, 0.0, 0.3],
            qd: [0.0; 4],
        }; 2];
        let mut w = World::new(robot, [0.0, 0.0]);
        let agent = ExternalAgent {
            mode: AgentMode::Scripted,
            stiffness: 0.0,
            damping: 0.0,
            max_force: 20.0,
            path: vec![],
            script: vec![agent::WrenchSample {
                t: 0.0,
                wrench: [10.0, 0.0, 0.0],
            }],
        };
        w.attach_object(2.0, 1.0, agent, &cfg);
        let obj = w.object.as_ref().unwrap().object;
        let (hands, _) = w.hands_world(&cfg);
        for i in 0..2 {
            let g = obj.grip_world(&obj.robot_grips[i]);
            assert_abs_diff_eq!(g.x, hands[i].x, epsilon = 1e-12);
            assert_abs_diff_eq!(g.y, hands[i].y, epsilon = 1e-12);
        }
        w = world_step(&w, &TorqueCommand::default(), &cfg, 1e-3).unwrap();
        assert_eq!(w.interaction.agent_wrench, [10.0, 0.0, 0.0]);
        assert_eq!(w.interaction.f_ext_x, 0.0);
    }
}
