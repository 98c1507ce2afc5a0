//! Parameter sets and the flat key-value config file.
//!
//! Every tunable lives in exactly one default below. A config file is a flat
//! TOML table (`key = value` per line, no sections); unknown keys are errors so
//! typos never silently fall back to defaults.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TeleopError};
use crate::models::arm::ArmModel;

// Retargeting and feedback constants fixed by the teleoperation design.
pub const GRAVITY: f64 = 9.81;
pub const VELOCITY_SCALING: f64 = 3.0;
pub const YAW_SCALING: f64 = 1.5;
pub const YAW_ACCEL_SCALING: f64 = 25.0;
pub const NULL_SPACE_SCALING: f64 = 0.15;
pub const CONTACT_MOMENT_SCALING: f64 = 0.5;
pub const ROBOT_YAW_INERTIA: f64 = 0.1;
pub const HUMAN_YAW_INERTIA: f64 = 0.3;
pub const BLEND_SPAN: f64 = 0.070;
pub const CONTACT_DWELL: f64 = 0.055;
pub const LOOP_RATE_HZ: f64 = 200.0;
pub const HMI_YAW_LIMIT: f64 = PI / 3.0;
pub const HAPTIC_FORCE_LIMIT: f64 = 400.0;
pub const HAPTIC_MOMENT_LIMIT: f64 = 20.0;

/// Reduced-order body parameters for the pilot and the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub h_h: f64,
    pub h_r: f64,
    pub m_h: f64,
    pub m_r: f64,
    /// Wheel/cart share of `m_r`; the rest is the pendulum body.
    pub cart_mass: f64,
    /// Rotational inertia of the pendulum body about its CoM, kg·m².
    pub pole_inertia: f64,
    pub i_zh: f64,
    pub i_zr: f64,
    pub r_w: f64,
    pub d: f64,
    pub gamma_h: f64,
    pub gamma_r: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            g: GRAVITY,
            h_h: 1.0,
            h_r: 0.5,
            m_h: 70.0,
            m_r: 12.5,
            cart_mass: 2.5,
            pole_inertia: 0.8,
            i_zh: HUMAN_YAW_INERTIA,
            i_zr: ROBOT_YAW_INERTIA,
            r_w: 0.05,
            d: 0.3,
            gamma_h: 1.0,
            gamma_r: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn pole_mass(&self) -> f64 {
        self.m_r - self.cart_mass
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g", self.g),
            ("h_h", self.h_h),
            ("h_r", self.h_r),
            ("m_h", self.m_h),
            ("m_r", self.m_r),
            ("cart_mass", self.cart_mass),
            ("i_zh", self.i_zh),
            ("i_zr", self.i_zr),
            ("r_w", self.r_w),
            ("d", self.d),
            ("gamma_h", self.gamma_h),
            ("gamma_r", self.gamma_r),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be finite and strictly positive"));
            }
        }
        if !(self.pole_inertia.is_finite() && self.pole_inertia >= 0.0) {
            return Err(invalid("pole_inertia", "must be finite and non-negative"));
        }
        if self.cart_mass >= self.m_r {
            return Err(invalid("cart_mass", "must be smaller than m_r"));
        }
        Ok(())
    }
}

/// Gains of the three retargeting mappings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingGains {
    pub k_v: f64,
    pub k_y: f64,
    pub k_m: f64,
    /// Anti-windup bound on `x_des - x_R` in sagittal P mode, m.
    pub x_error_clamp: f64,
}

impl Default for MappingGains {
    fn default() -> Self {
        Self {
            k_v: VELOCITY_SCALING,
            k_y: YAW_SCALING,
            k_m: YAW_ACCEL_SCALING,
            x_error_clamp: 0.5,
        }
    }
}

impl MappingGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_v", self.k_v),
            ("k_y", self.k_y),
            ("k_m", self.k_m),
            ("x_error_clamp", self.x_error_clamp),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be finite and strictly positive"));
            }
        }
        Ok(())
    }
}

/// Tracking-controller gains and actuator limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Diagonal of the LQR state weight, state order `[x, θ, ẋ, θ̇]`.
    pub lqr_q: [f64; 4],
    pub lqr_r: f64,
    /// Target location (s⁻¹, positive number) of the slow closed-loop pole of
    /// the DCM pitch loop; `K_DCM` is derived from it.
    pub dcm_pole: f64,
    pub kp_yaw: f64,
    pub kd_yaw: f64,
    pub kp_joint: [f64; 4],
    pub kd_joint: [f64; 4],
    pub k_x: [f64; 3],
    pub k_dx: [f64; 3],
    pub epsilon: f64,
    pub gravity_comp: bool,
    pub wheel_force_limit: f64,
    pub yaw_torque_limit: f64,
    pub joint_torque_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            lqr_q: [3000.0, 100.0, 10.0, 10.0],
            lqr_r: 1.0,
            dcm_pole: 3.0,
            kp_yaw: 2.0,
            kd_yaw: 0.4,
            kp_joint: [20.0; 4],
            kd_joint: [0.5; 4],
            k_x: [200.0; 3],
            k_dx: [10.0; 3],
            epsilon: NULL_SPACE_SCALING,
            gravity_comp: true,
            wheel_force_limit: 40.0,
            yaw_torque_limit: 2.0,
            joint_torque_limit: 8.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if self.lqr_q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("lqr_q", "must be non-negative"));
        }
        if !(self.lqr_r.is_finite() && self.lqr_r > 0.0) {
            return Err(invalid("lqr_r", "must be strictly positive"));
        }
        let nonneg = self
            .kp_joint
            .iter()
            .chain(&self.kd_joint)
            .chain(&self.k_x)
            .chain(&self.k_dx)
            .chain([&self.kp_yaw, &self.kd_yaw]);
        for v in nonneg {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(invalid("gains", "diagonal gains must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", "must lie in [0, 1]"));
        }
        if !(self.dcm_pole.is_finite() && self.dcm_pole > 0.0) {
            return Err(invalid("dcm_pole", "must be strictly positive"));
        }
        for (name, v) in [
            ("wheel_force_limit", self.wheel_force_limit),
            ("yaw_torque_limit", self.yaw_torque_limit),
            ("joint_torque_limit", self.joint_torque_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be strictly positive"));
            }
        }
        Ok(())
    }
}

/// Which haptic channels are active and how they are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub k_fb: f64,
    pub enable_contact_force: bool,
    pub enable_moment_fb: bool,
    pub enable_ff_moment: bool,
    /// When false the robot wheel moment `M_zR` is dropped from the moment
    /// feedback, leaving only the contact term.
    pub include_robot_moment: bool,
    pub force_limit: f64,
    pub moment_limit: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            k_fb: CONTACT_MOMENT_SCALING,
            enable_contact_force: false,
            enable_moment_fb: false,
            enable_ff_moment: false,
            include_robot_moment: false,
            force_limit: HAPTIC_FORCE_LIMIT,
            moment_limit: HAPTIC_MOMENT_LIMIT,
        }
    }
}

/// Timing and contact constants of the simulated world and the session loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub physics_dt: f64,
    pub control_dt: f64,
    pub blend_span: f64,
    pub contact_dwell: f64,
    pub hmi_yaw_limit: f64,
    /// Penalty normal stiffness/damping for hand-box and box-wall contact.
    pub contact_k: f64,
    pub contact_b: f64,
    /// Stick-slip tangential spring at the hands.
    pub hand_tangent_k: f64,
    pub hand_tangent_b: f64,
    pub hand_friction: f64,
    /// Contact force magnitude above which a hand sensor reads "touching".
    pub contact_sensor_threshold: f64,
    /// Shoulder position relative to the ground-projected CoM (heading frame).
    pub shoulder_x: f64,
    pub shoulder_y: f64,
    /// Shoulder height above the wheel axle, m.
    pub shoulder_height: f64,
    /// Latched-gripper coupling between hands and a carried object.
    pub grip_k: f64,
    pub grip_b: f64,
    /// Live-stream silence that triggers a safe-stop, s.
    pub stream_gap_limit: f64,
    /// Cutoff of the low-pass applied to live pilot rates, Hz.
    pub rate_filter_cutoff: f64,
    /// Telemetry rate toward a live console, Hz.
    pub telemetry_rate: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            physics_dt: 0.001,
            control_dt: 1.0 / LOOP_RATE_HZ,
            blend_span: BLEND_SPAN,
            contact_dwell: CONTACT_DWELL,
            hmi_yaw_limit: HMI_YAW_LIMIT,
            contact_k: 5000.0,
            contact_b: 50.0,
            hand_tangent_k: 3000.0,
            hand_tangent_b: 30.0,
            hand_friction: 0.8,
            contact_sensor_threshold: 0.5,
            shoulder_x: 0.0,
            shoulder_y: 0.15,
            shoulder_height: 0.65,
            grip_k: 2000.0,
            grip_b: 40.0,
            stream_gap_limit: 0.1,
            rate_filter_cutoff: 10.0,
            telemetry_rate: 50.0,
        }
    }
}

impl SimParams {
    /// Physics substeps per control tick.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    /// Control ticks per telemetry message.
    pub fn telemetry_rate_divisor(&self) -> u64 {
        (1.0 / (self.telemetry_rate * self.control_dt)).round() as u64
    }
}

/// Everything a session needs, loadable from one flat file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub physical: PhysicalParams,
    pub mapping: MappingGains,
    pub control: ControllerGains,
    pub feedback: FeedbackConfig,
    pub sim: SimParams,
    pub robot_arm: ArmModel,
    pub human_arm: ArmModel,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            physical: PhysicalParams::default(),
            mapping: MappingGains::default(),
            control: ControllerGains::default(),
            feedback: FeedbackConfig::default(),
            sim: SimParams::default(),
            robot_arm: ArmModel::robot_default(),
            human_arm: ArmModel::human_default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.mapping.validate()?;
        self.control.validate()?;
        self.robot_arm.validate()?;
        self.human_arm.validate()?;
        if self.feedback.k_fb < 0.0 {
            return Err(invalid("k_fb", "must be non-negative"));
        }
        let s = &self.sim;
        if !(s.physics_dt > 0.0 && s.physics_dt <= 0.01) {
            return Err(invalid("physics_dt", "must lie in (0, 0.01]"));
        }
        let ratio = s.control_dt / s.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(invalid(
                "control_dt",
                "must be an integer multiple of physics_dt",
            ));
        }
        for (name, v) in [
            ("stream_gap_limit", s.stream_gap_limit),
            ("rate_filter_cutoff", s.rate_filter_cutoff),
            ("telemetry_rate", s.telemetry_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if s.telemetry_rate * s.control_dt > 1.0 {
            return Err(invalid("telemetry_rate", "cannot exceed the loop rate"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parse a flat `key = value` document on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| TeleopError::Config(e.to_string()))?;
        let mut cfg = Config::default();
        for (key, value) in &table {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat key listing with current values, the same format `load` reads.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.flat_entries() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    fn flat_entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.physical;
        let m = &self.mapping;
        let c = &self.control;
        let f = &self.feedback;
        let s = &self.sim;
        let arr = |v: &[f64]| {
            format!(
                "[{}]",
                v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
            )
        };
        vec![
            ("g", fmt_f64(p.g)),
            ("h_h", fmt_f64(p.h_h)),
            ("h_r", fmt_f64(p.h_r)),
            ("m_h", fmt_f64(p.m_h)),
            ("m_r", fmt_f64(p.m_r)),
            ("cart_mass", fmt_f64(p.cart_mass)),
            ("pole_inertia", fmt_f64(p.pole_inertia)),
            ("i_zh", fmt_f64(p.i_zh)),
            ("i_zr", fmt_f64(p.i_zr)),
            ("r_w", fmt_f64(p.r_w)),
            ("d", fmt_f64(p.d)),
            ("gamma_h", fmt_f64(p.gamma_h)),
            ("gamma_r", fmt_f64(p.gamma_r)),
            ("k_v", fmt_f64(m.k_v)),
            ("k_y", fmt_f64(m.k_y)),
            ("k_m", fmt_f64(m.k_m)),
            ("x_error_clamp", fmt_f64(m.x_error_clamp)),
            ("lqr_q", arr(&c.lqr_q)),
            ("lqr_r", fmt_f64(c.lqr_r)),
            ("dcm_pole", fmt_f64(c.dcm_pole)),
            ("kp_yaw", fmt_f64(c.kp_yaw)),
            ("kd_yaw", fmt_f64(c.kd_yaw)),
            ("kp_joint", arr(&c.kp_joint)),
            ("kd_joint", arr(&c.kd_joint)),
            ("k_x", arr(&c.k_x)),
            ("k_dx", arr(&c.k_dx)),
            ("epsilon", fmt_f64(c.epsilon)),
            ("gravity_comp", c.gravity_comp.to_string()),
            ("wheel_force_limit", fmt_f64(c.wheel_force_limit)),
            ("yaw_torque_limit", fmt_f64(c.yaw_torque_limit)),
            ("joint_torque_limit", fmt_f64(c.joint_torque_limit)),
            ("k_fb", fmt_f64(f.k_fb)),
            ("enable_contact_force", f.enable_contact_force.to_string()),
            ("enable_moment_fb", f.enable_moment_fb.to_string()),
            ("enable_ff_moment", f.enable_ff_moment.to_string()),
            ("include_robot_moment", f.include_robot_moment.to_string()),
            ("haptic_force_limit", fmt_f64(f.force_limit)),
            ("haptic_moment_limit", fmt_f64(f.moment_limit)),
            ("physics_dt", fmt_f64(s.physics_dt)),
            ("control_dt", fmt_f64(s.control_dt)),
            ("blend_span", fmt_f64(s.blend_span)),
            ("contact_dwell", fmt_f64(s.contact_dwell)),
            ("hmi_yaw_limit", fmt_f64(s.hmi_yaw_limit)),
            ("contact_k", fmt_f64(s.contact_k)),
            ("contact_b", fmt_f64(s.contact_b)),
            ("hand_tangent_k", fmt_f64(s.hand_tangent_k)),
            ("hand_tangent_b", fmt_f64(s.hand_tangent_b)),
            ("hand_friction", fmt_f64(s.hand_friction)),
            ("contact_sensor_threshold", fmt_f64(s.contact_sensor_threshold)),
            ("shoulder_x", fmt_f64(s.shoulder_x)),
            ("shoulder_y", fmt_f64(s.shoulder_y)),
            ("shoulder_height", fmt_f64(s.shoulder_height)),
            ("grip_k", fmt_f64(s.grip_k)),
            ("grip_b", fmt_f64(s.grip_b)),
            ("stream_gap_limit", fmt_f64(s.stream_gap_limit)),
            ("rate_filter_cutoff", fmt_f64(s.rate_filter_cutoff)),
            ("telemetry_rate", fmt_f64(s.telemetry_rate)),
            ("robot_upper_arm", fmt_f64(self.robot_arm.upper_len)),
            ("robot_forearm", fmt_f64(self.robot_arm.fore_len)),
            ("human_upper_arm", fmt_f64(self.human_arm.upper_len)),
            ("human_forearm", fmt_f64(self.human_arm.fore_len)),
        ]
    }

    fn set(&mut self, key: &str, value: &toml::Value) -> Result<()> {
        let num = || as_f64(key, value);
        let flag = || {
            value
                .as_bool()
                .ok_or_else(|| TeleopError::Config(format!("`{key}` expects a boolean")))
        };
        match key {
            "g" => self.physical.g = num()?,
            "h_h" => self.physical.h_h = num()?,
            "h_r" => self.physical.h_r = num()?,
            "m_h" => self.physical.m_h = num()?,
            "m_r" => self.physical.m_r = num()?,
            "cart_mass" => self.physical.cart_mass = num()?,
            "pole_inertia" => self.physical.pole_inertia = num()?,
            "i_zh" => self.physical.i_zh = num()?,
            "i_zr" => self.physical.i_zr = num()?,
            "r_w" => self.physical.r_w = num()?,
            "d" => self.physical.d = num()?,
            "gamma_h" => self.physical.gamma_h = num()?,
            "gamma_r" => self.physical.gamma_r = num()?,
            "k_v" => self.mapping.k_v = num()?,
            "k_y" => self.mapping.k_y = num()?,
            "k_m" => self.mapping.k_m = num()?,
            "x_error_clamp" => self.mapping.x_error_clamp = num()?,
            "lqr_q" => self.control.lqr_q = as_array(key, value)?,
            "lqr_r" => self.control.lqr_r = num()?,
            "dcm_pole" => self.control.dcm_pole = num()?,
            "kp_yaw" => self.control.kp_yaw = num()?,
            "kd_yaw" => self.control.kd_yaw = num()?,
            "kp_joint" => self.control.kp_joint = as_array(key, value)?,
            "kd_joint" => self.control.kd_joint = as_array(key, value)?,
            "k_x" => self.control.k_x = as_array(key, value)?,
            "k_dx" => self.control.k_dx = as_array(key, value)?,
            "epsilon" => self.control.epsilon = num()?,
            "gravity_comp" => self.control.gravity_comp = flag()?,
            "wheel_force_limit" => self.control.wheel_force_limit = num()?,
            "yaw_torque_limit" => self.control.yaw_torque_limit = num()?,
            "joint_torque_limit" => self.control.joint_torque_limit = num()?,
            "k_fb" => self.feedback.k_fb = num()?,
            "enable_contact_force" => self.feedback.enable_contact_force = flag()?,
            "enable_moment_fb" => self.feedback.enable_moment_fb = flag()?,
            "enable_ff_moment" => self.feedback.enable_ff_moment = flag()?,
            "include_robot_moment" => self.feedback.include_robot_moment = flag()?,
            "haptic_force_limit" => self.feedback.force_limit = num()?,
            "haptic_moment_limit" => self.feedback.moment_limit = num()?,
            "physics_dt" => self.sim.physics_dt = num()?,
            "control_dt" => self.sim.control_dt = num()?,
            "blend_span" => self.sim.blend_span = num()?,
            "contact_dwell" => self.sim.contact_dwell = num()?,
            "hmi_yaw_limit" => self.sim.hmi_yaw_limit = num()?,
            "contact_k" => self.sim.contact_k = num()?,
            "contact_b" => self.sim.contact_b = num()?,
            "hand_tangent_k" => self.sim.hand_tangent_k = num()?,
            "hand_tangent_b" => self.sim.hand_tangent_b = num()?,
            "hand_friction" => self.sim.hand_friction = num()?,
            "contact_sensor_threshold" => self.sim.contact_sensor_threshold = num()?,
            "shoulder_x" => self.sim.shoulder_x = num()?,
            "shoulder_y" => self.sim.shoulder_y = num()?,
            "shoulder_height" => self.sim.shoulder_height = num()?,
            "grip_k" => self.sim.grip_k = num()?,
            "grip_b" => self.sim.grip_b = num()?,
            "stream_gap_limit" => self.sim.stream_gap_limit = num()?,
            "rate_filter_cutoff" => self.sim.rate_filter_cutoff = num()?,
            "telemetry_rate" => self.sim.telemetry_rate = num()?,
            "robot_upper_arm" => self.robot_arm.set_upper_len(num()?),
            "robot_forearm" => self.robot_arm.set_fore_len(num()?),
            "human_upper_arm" => self.human_arm.set_upper_len(num()?),
            "human_forearm" => self.human_arm.set_fore_len(num()?),
            other => return Err(TeleopError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn as_f64(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(TeleopError::Config(format!("`{key}` expects a number"))),
    }
}

fn as_array<const N: usize>(key: &str, value: &toml::Value) -> Result<[f64; N]> {
    let arr = value
        .as_array()
        .ok_or_else(|| TeleopError::Config(format!("`{key}` expects an array of {N} numbers")))?;
    if arr.len() != N {
        return Err(TeleopError::Config(format!(
            "`{key}` expects {N} entries, got {}",
            arr.len()
        )));
    }
    let mut out = [0.0; N];
    for (slot, v) in out.iter_mut().zip(arr) {
        *slot = as_f64(key, v)?;
    }
    Ok(out)
}

fn invalid(name: &str, reason: &str) -> TeleopError {
    TeleopError::InvalidParam {
        name: name.to_string(),
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_flat_file() {
        let mut cfg = Config::default();
        cfg.mapping.k_v = 2.5;
        cfg.control.k_x = [150.0, 160.0, 170.0];
        cfg.feedback.enable_moment_fb = true;
        let text = cfg.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = Config::from_toml_str("k_vv = 3.0").unwrap_err();
        assert!(err.to_string().contains("k_vv"));
    }

    #[test]
    fn sections_are_not_flat() {
        assert!(Config::from_toml_str("[mapping]\nk_v = 3.0").is_err());
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let cfg = Config::from_toml_str("m_r = 13\ncart_mass = 3").unwrap();
        assert_eq!(cfg.physical.m_r, 13.0);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(Config::from_toml_str("h_r = 0.0").is_err());
        assert!(Config::from_toml_str("epsilon = 1.5").is_err());
        assert!(Config::from_toml_str("control_dt = 0.0045").is_err());
        assert!(Config::from_toml_str("cart_mass = 20.0").is_err());
    }

    #[test]
    fn default_timing_gives_five_substeps() {
        assert_eq!(SimParams::default().substeps(), 5);
    }
}
