//! Declarative scenarios and their success predicates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BoxBody, BoxWorld, ExternalAgent, Wall, World};
use crate::config::Config;
use crate::error::{Result, TeleopError};
use crate::log::RunLog;
use crate::state::{ArmState, JointVec, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialRobot {
    /// Base position on the floor, m.
    #[serde(default)]
    pub base: [f64; 2],
    #[serde(default)]
    pub phi: f64,
    /// Initial arm joints `[right, left]`; when absent they are retargeted
    /// from the first pilot sample.
    #[serde(default)]
    pub arms: Option<[JointVec; 2]>,
}

/// Target region for the box center plus the wall-contact requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotRegion {
    pub x_min: f64,
    pub x_max: f64,
    /// Bound on `|y|` of the box center.
    pub y_max: f64,
    /// Wall normal force that counts as "against the backrest", N.
    pub wall_force: f64,
}

impl SlotRegion {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y.abs() <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub mass: f64,
    pub length: f64,
}

/// Desired-position offset added to the sagittal integrator at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftInjection {
    pub t: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessPredicate {
    /// Box center inside the slot while the wall pushes back hard enough.
    BoxSlot,
    /// Pitch stays within `max_pitch` for the whole run.
    Upright { max_pitch: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Run length, s.
    pub duration: f64,
    /// Pilot trace, relative to the scenario file.
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub robot: InitialRobot,
    #[serde(default, rename = "box")]
    pub box_body: Option<BoxBody>,
    #[serde(default)]
    pub wall: Option<Wall>,
    #[serde(default)]
    pub slot: Option<SlotRegion>,
    #[serde(default)]
    pub object: Option<ObjectSpec>,
    #[serde(default)]
    pub agent: Option<ExternalAgent>,
    pub success: SuccessPredicate,
    #[serde(default)]
    pub drift: Option<DriftInjection>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| TeleopError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Load a scenario file; a relative trace path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TeleopError::Scenario(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        if let (Some(trace), Some(dir)) = (&s.trace, path.parent()) {
            if trace.is_relative() {
                s.trace = Some(dir.join(trace));
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TeleopError::Scenario(format!("{}: {m}", self.name)));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if let Some(b) = &self.box_body {
            if !(b.mass > 0.0 && b.half.iter().all(|h| *h > 0.0) && b.height > 0.0) {
                return bad("box needs positive mass and extents");
            }
            if !(b.mu_s >= b.mu_k && b.mu_k >= 0.0) {
                return bad("box friction needs mu_s >= mu_k >= 0");
            }
            if self.wall.is_none() {
                return bad("a box scenario needs a wall");
            }
        }
        if self.success == SuccessPredicate::BoxSlot && (self.box_body.is_none() || self.slot.is_none()) {
            return bad("box_slot success needs [box] and [slot]");
        }
        if self.agent.is_some() != self.object.is_some() {
            return bad("[agent] and [object] go together");
        }
        if let Some(a) = &self.agent {
            if !(a.max_force > 0.0 && a.stiffness >= 0.0 && a.damping >= 0.0) {
                return bad("agent gains must be non-negative and max_force positive");
            }
        }
        Ok(())
    }

    /// Number of control ticks in a complete run.
    pub fn ticks(&self, control_dt: f64) -> usize {
        (self.duration / control_dt).round() as usize
    }

    /// World at t = 0 with the given initial arm joints.
    pub fn initial_world(&self, arms: [JointVec; 2], cfg: &Config) -> World {
        let robot = RobotState {
            phi: self.robot.phi,
            arms: arms.map(|q| ArmState { q, qd: [0.0; 4] }),
            ..Default::default()
        };
        let mut world = World::new(robot, self.robot.base);
        if let (Some(body), Some(wall)) = (self.box_body, self.wall) {
            world.box_world = Some(BoxWorld {
                body,
                wall,
                anchors: [None; 2],
            });
        }
        if let (Some(spec), Some(agent)) = (self.object, &self.agent) {
            world.attach_object(spec.mass, spec.length, agent.clone(), cfg);
        }
        world
    }
}

/// Pitch beyond which the robot counts as fallen, whatever else happened.
pub const FALL_PITCH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scenario: String,
    pub success: bool,
    /// First time the predicate held (box scenarios), s.
    pub completion_time: Option<f64>,
    /// Mode edges per channel `[sagittal, yaw, arm]`.
    pub mode_switches: [usize; 3],
    /// Peak contact force magnitude per hand `[right, left]`, N.
    pub peak_hand_force: [f64; 2],
    pub peak_wall_force: f64,
    pub max_abs_pitch: f64,
    pub final_box_pose: Option<[f64; 3]>,
    pub fault: bool,
    pub fell: bool,
}

/// Judge a complete run from its log alone.
pub fn evaluate_scenario(log: &RunLog) -> Result<Evaluation> {
    let scenario = &log.scenario;
    let expected = scenario.ticks(log.config.sim.control_dt);
    let fault = log.series("fault")?.iter().any(|v| *v != 0.0);
    if log.len() != expected && !fault {
        return Err(TeleopError::Evaluation(format!(
            "incomplete log: {} of {expected} ticks",
            log.len()
        )));
    }
    let t = log.series("t")?;
    let switches = |name: &str| -> Result<usize> {
        let s = log.series(name)?;
        Ok(s.windows(2).filter(|w| w[0] != w[1]).count())
    };
    let mode_switches = [switches("mode_s")?, switches("mode_y")?, switches("mode_a")?];
    let mut peak_hand_force = [0.0f64; 2];
    for (k, s) in ["r", "l"].iter().enumerate() {
        let fx = log.series(&format!("f_hand_{s}_x"))?;
        let fy = log.series(&format!("f_hand_{s}_y"))?;
        let fz = log.series(&format!("f_hand_{s}_z"))?;
        for i in 0..fx.len() {
            peak_hand_force[k] = peak_hand_force[k].max((fx[i] * fx[i] + fy[i] * fy[i] + fz[i] * fz[i]).sqrt());
        }
    }
    let wall = log.series("wall_normal")?;
    let peak_wall_force = wall.iter().cloned().fold(0.0, f64::max);
    let theta = log.series("theta")?;
    let max_abs_pitch = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fell = max_abs_pitch >= FALL_PITCH;

    let (success, completion_time, final_box_pose) = match scenario.success {
        SuccessPredicate::BoxSlot => {
            let slot = scenario
                .slot
                .ok_or_else(|| TeleopError::Evaluation("scenario has no slot".into()))?;
            let bx = log.series("box_x")?;
            let by = log.series("box_y")?;
            let byaw = log.series("box_yaw")?;
            let hit = (0..log.len()).find(|&i| {
                t[i] <= scenario.duration && slot.contains(bx[i], by[i]) && wall[i] > slot.wall_force
            });
            let last = log.len().checked_sub(1).map(|i| [bx[i], by[i], byaw[i]]);
            (hit.is_some() && !fault && !fell, hit.map(|i| t[i]), last)
        }
        SuccessPredicate::Upright { max_pitch } => (max_abs_pitch < max_pitch && !fault, None, None),
    };
    Ok(Evaluation {
        scenario: scenario.name.clone(),
        success,
        completion_time,
        mode_switches,
        peak_hand_force,
        peak_wall_force,
        max_abs_pitch,
        final_box_pose,
        fault,
        fell,
    })
}
