//! The 200 Hz bilateral loop: input → retargeting → control → physics →
//! haptics → emission → log.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3x4, Vector4};

use super::pilot::{LogPilot, PilotEvent, PilotSource, ScriptedPilot, SessionView, Trace};
use crate::config::Config;
use crate::control::{Controller, TorqueCommand};
use crate::error::{Result, TeleopError};
use crate::haptics::{compute_feedback, contact_machine_step_with, estimate_external_moment, ff_moment, ContactState, HapticFeedback};
use crate::log::{RunLog, TickRecord};
use crate::models::arm::{arm_ik_spherical, arm_jacobian, gravity_torque};
use crate::models::pendulum::{dcm, natural_frequency};
use crate::models::yaw::wheel_moment;
use crate::retarget::{retarget_tick, ModeState, SagittalSetpoint, Setpoints, YawSetpoint};
use crate::sim::{contact_sensors, world_step, Scenario, World};
use crate::state::{JointVec, PilotInput};

/// One running session: world, retargeting state and the growing log.
pub struct Session {
    pub cfg: Config,
    pub scenario: Scenario,
    controller: Controller,
    pub world: World,
    pub modes: ModeState,
    pub contact: ContactState,
    prev_input: PilotInput,
    pub tick: u64,
    pub log: RunLog,
    pub finished: bool,
    omega_r: f64,
    omega_h: f64,
}

impl Session {
    /// Build the initial world. Arms start at the scenario's joints, or at
    /// the retargeted pose of `first_input`; the resolved joints are written
    /// into the logged scenario so a replay starts identically.
    pub fn new(scenario: &Scenario, cfg: &Config, first_input: &PilotInput) -> Result<Self> {
        cfg.validate()?;
        scenario.validate()?;
        let first = first_input.sanitized(cfg.sim.hmi_yaw_limit)?;
        let arms: [JointVec; 2] = match scenario.robot.arms {
            Some(a) => a.map(|q| cfg.robot_arm.clamp_joints(q)),
            None => [0, 1].map(|i| arm_ik_spherical(&first.q_ah[i], &cfg.human_arm, &cfg.robot_arm, 0.0).q),
        };
        let mut logged = scenario.clone();
        logged.robot.arms = Some(arms);
        let world = logged.initial_world(arms, cfg);
        let mut modes = ModeState::aligned_with(&world.robot, cfg.sim.blend_span);
        modes.prev_q0 = [arms[0][0], arms[1][0]];
        Ok(Self {
            cfg: cfg.clone(),
            scenario: logged.clone(),
            controller: Controller::new(cfg)?,
            world,
            modes,
            contact: ContactState::default(),
            prev_input: first,
            tick: 0,
            log: RunLog::new(logged, cfg.clone()),
            finished: false,
            omega_r: natural_frequency(cfg.physical.h_r, cfg.physical.g)?,
            omega_h: natural_frequency(cfg.physical.h_h, cfg.physical.g)?,
        })
    }

    pub fn total_ticks(&self) -> u64 {
        self.scenario.ticks(self.cfg.sim.control_dt) as u64
    }

    pub fn done(&self) -> bool {
        self.finished || self.tick >= self.total_ticks()
    }

    pub fn t(&self) -> f64 {
        self.tick as f64 * self.cfg.sim.control_dt
    }

    pub fn view(&self) -> SessionView<'_> {
        SessionView {
            tick: self.tick,
            t: self.t(),
            world: &self.world,
            modes: &self.modes,
            contact: self.contact.state.code(),
        }
    }

    fn advance(&mut self, cmd: &TorqueCommand) -> Result<()> {
        for _ in 0..self.cfg.sim.substeps() {
            self.world = world_step(&self.world, cmd, &self.cfg, self.cfg.sim.physics_dt)?;
        }
        Ok(())
    }

    /// Run one control tick with `input`.
    pub fn step(&mut self, input: PilotInput) -> Result<TickRecord> {
        if self.finished {
            return Err(TeleopError::Domain("session already finished".into()));
        }
        let cfg = &self.cfg;
        let input = input.sanitized(cfg.sim.hmi_yaw_limit)?;
        if self.tick == 0 {
            self.prev_input = input;
        }
        let robot = self.world.robot;
        let (setpoints, mut modes) = retarget_tick(&input, &self.prev_input, &robot, &self.modes, cfg);
        if let Some(d) = self.scenario.drift {
            if self.tick == (d.t / cfg.sim.control_dt).round() as u64 {
                modes.x_des += d.amount;
            }
        }
        let ff = ff_moment(input.m_zh, &cfg.physical, &cfg.feedback);
        let out = self.controller.compute(&robot, &setpoints, &modes, &input, ff, cfg);
        let cmd = out.command;
        self.advance(&cmd)?;

        let cfg = &self.cfg;
        let it = self.world.interaction;
        let raw = contact_sensors(&it, cfg.sim.contact_sensor_threshold);
        let mut contact = contact_machine_step_with(raw[1], raw[0], &self.contact, cfg.sim.control_dt, cfg.sim.contact_dwell);
        contact.forces = it.hand_forces;
        contact.points = it.hand_points;

        let arms = &self.world.robot.arms;
        let tau_ext: [Vector4<f64>; 2] =
            [0, 1].map(|i| gravity_torque(&arms[i].q, &cfg.robot_arm) - Vector4::from(cmd.tau_arm[i]));
        let jac: [Matrix3x4<f64>; 2] = [0, 1].map(|i| arm_jacobian(&arms[i].q, &cfg.robot_arm));
        let estimate = estimate_external_moment(&contact, &tau_ext, &jac);

        let r = &self.world.robot;
        let xi_r = dcm(r.theta, r.thetadot, self.omega_r)?.xi;
        let xi_h = dcm(input.theta_h, input.thetadot_h, self.omega_h)?.xi;
        let haptics = compute_feedback(
            xi_r,
            xi_h,
            it.f_ext_x,
            wheel_moment(cmd.tau_y, &cfg.physical),
            estimate.moment.z,
            &cfg.physical,
            &cfg.feedback,
        );

        self.modes = modes;
        self.contact = contact;
        self.prev_input = input;
        let record = self.record(input, setpoints, cmd, haptics, xi_r, xi_h, estimate.moment.z, false);
        self.log.push(&record);
        self.tick += 1;
        Ok(record)
    }

    /// Stream fault: zero torques for one final tick and a fault record.
    pub fn safe_stop(&mut self) -> Result<TickRecord> {
        let cmd = TorqueCommand::default();
        self.advance(&cmd)?;
        let r = self.world.robot;
        let xi_r = dcm(r.theta, r.thetadot, self.omega_r)?.xi;
        let input = self.prev_input;
        let setpoints = Setpoints {
            sagittal: SagittalSetpoint::Velocity {
                x_des: self.modes.x_des,
                xdot_des: 0.0,
            },
            yaw: YawSetpoint::Position {
                phi_des: r.phi,
                phidot_des: 0.0,
            },
            arm: [0, 1].map(|i| crate::retarget::ArmSetpoint::Joint { q_des: r.arms[i].q }),
            ik_singular: [false; 2],
        };
        let record = self.record(input, setpoints, cmd, HapticFeedback::default(), xi_r, 0.0, 0.0, true);
        self.log.push(&record);
        self.tick += 1;
        self.finished = true;
        Ok(record)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        input: PilotInput,
        setpoints: Setpoints,
        command: TorqueCommand,
        haptics: HapticFeedback,
        xi_r: f64,
        xi_h: f64,
        m_ext_est: f64,
        fault: bool,
    ) -> TickRecord {
        let (hands, _) = self.world.hands_world(&self.cfg);
        let (box_pose, box_vel) = self
            .world
            .box_world
            .map_or(([0.0; 3], [0.0; 3]), |b| (b.body.pose, b.body.vel));
        let object_pose = self.world.object.as_ref().map_or([0.0; 3], |o| o.object.pose);
        TickRecord {
            tick: self.tick,
            t: (self.tick + 1) as f64 * self.cfg.sim.control_dt,
            input,
            robot: self.world.robot,
            base: self.world.base,
            modes: self.modes,
            setpoints,
            command,
            contact: self.contact,
            haptics,
            xi_r,
            xi_h,
            interaction: self.world.interaction,
            m_ext_est,
            hands: hands.map(|h| [h.x, h.y]),
            box_pose,
            box_vel,
            object_pose,
            fault,
        }
    }
}

/// Drive a session to completion. `emit` sees every tick record; with
/// `pace` the loop sleeps to hold that period.
pub fn run_session(
    scenario: &Scenario,
    pilot: &mut dyn PilotSource,
    cfg: &Config,
    first_input: &PilotInput,
    emit: &mut dyn FnMut(&TickRecord),
    pace: Option<Duration>,
) -> Result<RunLog> {
    let mut session = Session::new(scenario, cfg, first_input)?;
    let start = Instant::now();
    while !session.done() {
        let record = match pilot.next(&session.view())? {
            PilotEvent::Input(u) => session.step(u)?,
            PilotEvent::Gap => session.safe_stop()?,
            PilotEvent::Stop => break,
        };
        emit(&record);
        if let Some(period) = pace {
            let due = start + period * session.tick as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
    }
    Ok(session.log)
}

/// Re-simulate a log from its recorded inputs.
pub fn replay(log: &RunLog) -> Result<RunLog> {
    let mut pilot = LogPilot::new(log)?;
    let first = pilot.first();
    run_session(&log.scenario, &mut pilot, &log.config, &first, &mut |_| {}, None)
}

/// First `(row, column)` where two logs differ bitwise.
pub fn first_divergence(a: &RunLog, b: &RunLog) -> Option<(usize, String)> {
    if a.columns != b.columns {
        return Some((0, "<header>".into()));
    }
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        if let Some(k) = ra.iter().zip(rb).position(|(x, y)| x.to_bits() != y.to_bits()) {
            return Some((i, a.columns[k].clone()));
        }
    }
    if a.rows.len() != b.rows.len() {
        return Some((a.rows.len().min(b.rows.len()), "<length>".into()));
    }
    None
}

/// Run a scenario open-loop from a recorded pilot trace.
pub fn run_trace(scenario: &Scenario, trace: &Trace, cfg: &Config) -> Result<RunLog> {
    let first = trace.first();
    run_session(scenario, &mut ScriptedPilot::new(trace.clone()), cfg, &first, &mut |_| {}, None)
}

/// Run a closed-loop pilot and keep what it sent as a trace. The trace is
/// checked to reproduce the run bitwise when replayed open-loop.
pub fn record_trace(scenario: &Scenario, pilot: &mut dyn PilotSource, cfg: &Config, first: &PilotInput) -> Result<(Trace, RunLog)> {
    let mut rows = Vec::new();
    let log = run_session(scenario, pilot, cfg, first, &mut |r| rows.push(r.input), None)?;
    let trace = Trace { rows };
    let again = run_trace(scenario, &trace, cfg)?;
    if let Some((row, col)) = first_divergence(&log, &again) {
        return Err(TeleopError::Domain(format!(
            "recorded trace does not reproduce the run (row {row}, column {col})"
        )));
    }
    Ok((trace, log))
}
