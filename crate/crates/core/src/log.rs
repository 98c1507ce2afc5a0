//! Run logs: one all-numeric CSV row per control tick, preceded by metadata
//! comment lines and closed by an `# end <rows>` footer.
//!
//! ```text
//! # teleop-log 1
//! # scenario {...json...}
//! # config {...json...}
//! tick,t,theta_h,...
//! 0,0.0,0.0,...
//! # end 4000
//! ```
//!
//! Floats are written in their shortest round-trip form, so parsing a log
//! gives back the exact bits. Booleans and enums are written as integers.

use std::io::Write;
use std::path::Path;

use crate::config::{fmt_f64, Config};
use crate::control::TorqueCommand;
use crate::error::{Result, TeleopError};
use crate::haptics::{ContactState, HapticFeedback};
use crate::retarget::{ArmSetpoint, ModeState, SagittalSetpoint, Setpoints, YawSetpoint};
use crate::sim::{Interaction, Scenario};
use crate::state::{Mode, PilotInput, RobotState};

pub const LOG_VERSION: u32 = 1;
const MAGIC: &str = "teleop-log";

/// Everything recorded for one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    /// Pilot input the loop actually used.
    pub input: PilotInput,
    pub robot: RobotState,
    pub base: [f64; 2],
    pub modes: ModeState,
    pub setpoints: Setpoints,
    pub command: TorqueCommand,
    pub contact: ContactState,
    pub haptics: HapticFeedback,
    pub xi_r: f64,
    pub xi_h: f64,
    pub interaction: Interaction,
    /// z component of the joint-torque contact-moment estimate.
    pub m_ext_est: f64,
    /// Hand positions in the world, `[[x, y]; 2]`, `[right, left]`.
    pub hands: [[f64; 2]; 2],
    pub box_pose: [f64; 3],
    pub box_vel: [f64; 3],
    pub object_pose: [f64; 3],
    pub fault: bool,
}

struct Row {
    names: Vec<String>,
    values: Vec<f64>,
}

impl Row {
    fn put(&mut self, name: &str, v: f64) {
        self.names.push(name.to_string());
        self.values.push(v);
    }

    fn put_all(&mut self, prefix: &str, suffixes: &[&str], values: &[f64]) {
        for (s, v) in suffixes.iter().zip(values) {
            self.put(&format!("{prefix}{s}"), *v);
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn mode(m: Mode) -> f64 {
    f64::from(m.as_trigger())
}

const JOINTS: [&str; 4] = ["0", "1", "2", "3"];
const SIDES: [&str; 2] = ["r", "l"];
const XYZ: [&str; 3] = ["x", "y", "z"];

impl TickRecord {
    fn row(&self) -> Row {
        let mut r = Row {
            names: Vec::with_capacity(160),
            values: Vec::with_capacity(160),
        };
        r.put("tick", self.tick as f64);
        r.put("t", self.t);

        let i = &self.input;
        r.put("theta_h", i.theta_h);
        r.put("thetadot_h", i.thetadot_h);
        r.put("phi_h", i.phi_h);
        r.put("phidot_h", i.phidot_h);
        r.put("m_zh", i.m_zh);
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("q_ah_{s}"), &JOINTS, &i.q_ah[k]);
        }
        r.put("u_s", mode(i.u_s));
        r.put("u_y", mode(i.u_y));
        r.put("u_a", mode(i.u_a));
        r.put("input_time", i.timestamp);

        let rb = &self.robot;
        r.put("x", rb.x);
        r.put("xdot", rb.xdot);
        r.put("theta", rb.theta);
        r.put("thetadot", rb.thetadot);
        r.put("phi", rb.phi);
        r.put("phidot", rb.phidot);
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("q_{s}"), &JOINTS, &rb.arms[k].q);
            r.put_all(&format!("qd_{s}"), &JOINTS, &rb.arms[k].qd);
        }
        r.put("base_x", self.base[0]);
        r.put("base_y", self.base[1]);

        let m = &self.modes;
        r.put("mode_s", mode(m.mode_s));
        r.put("mode_y", mode(m.mode_y));
        r.put("mode_a", mode(m.mode_a));
        r.put("x_des_int", m.x_des);
        r.put("phi_offset", m.phi_offset);
        r.put("alpha", m.alpha);
        r.put("prev_q0_r", m.prev_q0[0]);
        r.put("prev_q0_l", m.prev_q0[1]);

        let sp = &self.setpoints;
        let (x_des, xdot_des, xi_des) = match sp.sagittal {
            SagittalSetpoint::Velocity { x_des, xdot_des } => (x_des, xdot_des, 0.0),
            SagittalSetpoint::Dcm { xi_des } => (0.0, 0.0, xi_des),
        };
        r.put("sp_x_des", x_des);
        r.put("sp_xdot_des", xdot_des);
        r.put("sp_xi_des", xi_des);
        let (phi_des, phidot_des, phiddot_des) = match sp.yaw {
            YawSetpoint::Position { phi_des, phidot_des } => (phi_des, phidot_des, 0.0),
            YawSetpoint::Acceleration { phiddot_des } => (0.0, 0.0, phiddot_des),
        };
        r.put("sp_phi_des", phi_des);
        r.put("sp_phidot_des", phidot_des);
        r.put("sp_phiddot_des", phiddot_des);
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("sp_q_{s}"), &JOINTS, &sp.arm[k].q_des());
            let hand = match sp.arm[k] {
                ArmSetpoint::Cartesian { x_des, .. } => [x_des.x, x_des.y, x_des.z],
                ArmSetpoint::Joint { .. } => [0.0; 3],
            };
            r.put_all(&format!("sp_hand_{s}_"), &XYZ, &hand);
            r.put(&format!("ik_singular_{s}"), flag(sp.ik_singular[k]));
        }

        let c = &self.command;
        r.put("wheel_force", c.wheel_force);
        r.put("tau_y", c.tau_y);
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("tau_{s}"), &JOINTS, &c.tau_arm[k]);
        }
        r.put("sat_wheel", flag(c.saturated.wheel));
        r.put("sat_yaw", flag(c.saturated.yaw));
        r.put("sat_arm_r", flag(c.saturated.arm[0]));
        r.put("sat_arm_l", flag(c.saturated.arm[1]));

        let ct = &self.contact;
        r.put("contact", f64::from(ct.state.code()));
        r.put("contact_candidate", f64::from(ct.candidate.code()));
        r.put("contact_dwell", ct.dwell_elapsed);
        r.put("raw_r", flag(ct.raw[0]));
        r.put("raw_l", flag(ct.raw[1]));

        let h = &self.haptics;
        r.put("f_xh", h.f_xh);
        r.put("m_zh_fb", h.m_zh_fb);
        r.put("sat_force", flag(h.saturated.force));
        r.put("sat_moment", flag(h.saturated.moment));
        r.put("fb_dcm_sync", h.components.dcm_sync);
        r.put("fb_contact_force", h.components.contact_force);
        r.put("fb_robot_moment", h.components.robot_moment);
        r.put("fb_contact_moment", h.components.contact_moment);
        r.put("xi_r", self.xi_r);
        r.put("xi_h", self.xi_h);

        let it = &self.interaction;
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("f_hand_{s}_"), &XYZ, &it.hand_forces[k]);
        }
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("p_hand_{s}_"), &XYZ, &it.hand_points[k]);
        }
        r.put("f_ext_x", it.f_ext_x);
        r.put("m_ext_z", it.m_ext_z);
        r.put("m_ext_est", self.m_ext_est);
        r.put("wall_normal", it.wall_normal);
        r.put("lift", it.lift);
        r.put_all("agent_", &["fx", "fy", "mz"], &it.agent_wrench);
        for (k, s) in SIDES.iter().enumerate() {
            r.put_all(&format!("hand_{s}_"), &["x", "y"], &self.hands[k]);
        }
        r.put_all("box_", &["x", "y", "yaw"], &self.box_pose);
        r.put_all("box_", &["vx", "vy", "w"], &self.box_vel);
        r.put_all("object_", &["x", "y", "yaw"], &self.object_pose);
        r.put("fault", flag(self.fault));
        r
    }

    pub fn values(&self) -> Vec<f64> {
        self.row().values
    }
}

/// Column names of every log row, in order.
pub fn columns() -> Vec<String> {
    let blank = TickRecord {
        tick: 0,
        t: 0.0,
        input: PilotInput::default(),
        robot: RobotState::default(),
        base: [0.0; 2],
        modes: ModeState::default(),
        setpoints: Setpoints {
            sagittal: SagittalSetpoint::Dcm { xi_des: 0.0 },
            yaw: YawSetpoint::Acceleration { phiddot_des: 0.0 },
            arm: [ArmSetpoint::Joint { q_des: [0.0; 4] }; 2],
            ik_singular: [false; 2],
        },
        command: TorqueCommand::default(),
        contact: ContactState::default(),
        haptics: HapticFeedback::default(),
        xi_r: 0.0,
        xi_h: 0.0,
        interaction: Interaction::default(),
        m_ext_est: 0.0,
        hands: [[0.0; 2]; 2],
        box_pose: [0.0; 3],
        box_vel: [0.0; 3],
        object_pose: [0.0; 3],
        fault: false,
    };
    blank.row().names
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub scenario: Scenario,
    pub config: Config,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RunLog {
    pub fn new(scenario: Scenario, config: Config) -> Self {
        Self {
            scenario,
            config,
            columns: columns(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, record: &TickRecord) {
        self.rows.push(record.values());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TeleopError::Log(format!("missing column `{name}`")))
    }

    /// One column across all rows.
    pub fn series(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.col(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Pilot input recorded at row `i`.
    pub fn input_at(&self, i: usize) -> Result<PilotInput> {
        let row = self
            .rows
            .get(i)
            .ok_or_else(|| TeleopError::Log(format!("row {i} out of range")))?;
        let get = |name: &str| self.col(name).map(|k| row[k]);
        let mut q_ah = [[0.0; 4]; 2];
        for (k, s) in SIDES.iter().enumerate() {
            for j in 0..4 {
                q_ah[k][j] = get(&format!("q_ah_{s}{j}"))?;
            }
        }
        let trig = |name: &str| get(name).map(|v| Mode::from_trigger(u8::from(v != 0.0)));
        Ok(PilotInput {
            theta_h: get("theta_h")?,
            thetadot_h: get("thetadot_h")?,
            phi_h: get("phi_h")?,
            phidot_h: get("phidot_h")?,
            m_zh: get("m_zh")?,
            q_ah,
            u_s: trig("u_s")?,
            u_y: trig("u_y")?,
            u_a: trig("u_a")?,
            timestamp: get("input_time")?,
        })
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let json = |e: serde_json::Error| TeleopError::Log(e.to_string());
        writeln!(out, "# {MAGIC} {LOG_VERSION}")?;
        writeln!(out, "# scenario {}", serde_json::to_string(&self.scenario).map_err(json)?)?;
        writeln!(out, "# config {}", serde_json::to_string(&self.config).map_err(json)?)?;
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
            }
            w.flush()?;
        }
        writeln!(out, "# end {}", self.rows.len())?;
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| TeleopError::Log(msg.to_string());
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| bad("empty log"))?;
        let version = head
            .strip_prefix(&format!("# {MAGIC} "))
            .ok_or_else(|| bad("not a run log"))?
            .trim()
            .parse::<u32>()
            .map_err(|_| bad("unreadable version"))?;
        if version != LOG_VERSION {
            return Err(TeleopError::Log(format!(
                "log version {version} is not supported (expected {LOG_VERSION})"
            )));
        }
        let json = |e: serde_json::Error| TeleopError::Log(e.to_string());
        let scenario: Scenario = serde_json::from_str(
            lines
                .next()
                .and_then(|l| l.strip_prefix("# scenario "))
                .ok_or_else(|| bad("missing scenario line"))?,
        )
        .map_err(json)?;
        let config: Config = serde_json::from_str(
            lines
                .next()
                .and_then(|l| l.strip_prefix("# config "))
                .ok_or_else(|| bad("missing config line"))?,
        )
        .map_err(json)?;

        let mut body = String::new();
        let mut footer = None;
        for line in lines {
            if let Some(n) = line.strip_prefix("# end ") {
                footer = Some(n.trim().parse::<usize>().map_err(|_| bad("bad footer"))?);
                break;
            }
            body.push_str(line);
            body.push('\n');
        }
        let expected = footer.ok_or_else(|| bad("truncated log (no end marker)"))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::with_capacity(expected);
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| TeleopError::Log(format!("bad number `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != columns.len() {
                return Err(bad("row width does not match header"));
            }
            rows.push(row);
        }
        if rows.len() != expected {
            return Err(TeleopError::Log(format!(
                "truncated log: footer says {expected} rows, found {}",
                rows.len()
            )));
        }
        Ok(Self {
            scenario,
            config,
            columns,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_are_unique() {
        let cols = columns();
        let mut sorted = cols.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), cols.len());
        assert_eq!(&cols[..2], &["tick", "t"]);
    }
}
