//! Bilateral feedback: sagittal force, whole-body yaw moment, contact-moment
//! estimation and the debounced four-state contact machine.

use nalgebra::{Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::config::{FeedbackConfig, PhysicalParams, CONTACT_DWELL};
use crate::control::arm::jacobian_transpose_pinv;
use crate::control::saturate;
use crate::state::Side;

/// Guards the dwell comparison against accumulated rounding in `dt` sums.
const DWELL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ContactKind {
    #[default]
    None,
    Left,
    Right,
    Both,
}

impl ContactKind {
    pub fn from_raw(left: bool, right: bool) -> Self {
        match (left, right) {
            (false, false) => ContactKind::None,
            (true, false) => ContactKind::Left,
            (false, true) => ContactKind::Right,
            (true, true) => ContactKind::Both,
        }
    }

    /// λ for one hand.
    pub fn includes(self, side: Side) -> bool {
        matches!(
            (self, side),
            (ContactKind::Both, _) | (ContactKind::Left, Side::Left) | (ContactKind::Right, Side::Right)
        )
    }

    pub fn code(self) -> u8 {
        match self {
            ContactKind::None => 0,
            ContactKind::Left => 1,
            ContactKind::Right => 2,
            ContactKind::Both => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ContactKind::None,
            1 => ContactKind::Left,
            2 => ContactKind::Right,
            3 => ContactKind::Both,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactState {
    pub state: ContactKind,
    /// Raw reading waiting to be committed.
    pub candidate: ContactKind,
    pub dwell_elapsed: f64,
    /// Raw sensor per hand, ordered `[right, left]`.
    pub raw: [bool; 2],
    /// Contact force on each hand, heading frame, N.
    pub forces: [[f64; 3]; 2],
    /// Hand position relative to the ground-projected CoM, heading frame, m.
    pub points: [[f64; 3]; 2],
}

/// Debounce with the default 55 ms dwell.
pub fn contact_machine_step(raw_left: bool, raw_right: bool, prev: &ContactState, dt: f64) -> ContactState {
    contact_machine_step_with(raw_left, raw_right, prev, dt, CONTACT_DWELL)
}

pub fn contact_machine_step_with(
    raw_left: bool,
    raw_right: bool,
    prev: &ContactState,
    dt: f64,
    dwell: f64,
) -> ContactState {
    let raw = ContactKind::from_raw(raw_left, raw_right);
    let mut next = ContactState {
        raw: [raw_right, raw_left],
        ..*prev
    };
    if raw == prev.state {
        next.candidate = raw;
        next.dwell_elapsed = 0.0;
        return next;
    }
    if raw != prev.candidate {
        next.candidate = raw;
        next.dwell_elapsed = 0.0;
    }
    next.dwell_elapsed += dt;
    if next.dwell_elapsed + DWELL_EPS >= dwell {
        next.state = raw;
        next.dwell_elapsed = 0.0;
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackComponents {
    pub dcm_sync: f64,
    pub contact_force: f64,
    pub robot_moment: f64,
    pub contact_moment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HapticSaturation {
    pub force: bool,
    pub moment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HapticFeedback {
    pub f_xh: f64,
    pub m_zh_fb: f64,
    pub saturated: HapticSaturation,
    pub components: FeedbackComponents,
}

/// Sagittal force and its two components (before saturation).
pub fn force_feedback(
    xi_r: f64,
    xi_h: f64,
    f_ext_x: f64,
    params: &PhysicalParams,
    cfg: &FeedbackConfig,
) -> (f64, bool, f64, f64) {
    let sync = params.gamma_h * (xi_r - xi_h);
    let contact = if cfg.enable_contact_force {
        params.gamma_h / params.gamma_r * f_ext_x
    } else {
        0.0
    };
    let (f, sat) = saturate(sync + contact, cfg.force_limit);
    (f, sat, sync, contact)
}

/// Yaw moment rendered to the pilot and its two components.
pub fn moment_feedback(
    m_zr: f64,
    m_ext_z: f64,
    params: &PhysicalParams,
    cfg: &FeedbackConfig,
) -> (f64, bool, f64, f64) {
    if !cfg.enable_moment_fb {
        return (0.0, false, 0.0, 0.0);
    }
    let ratio = params.i_zh / params.i_zr;
    let robot = if cfg.include_robot_moment { ratio * m_zr } else { 0.0 };
    let contact = ratio * cfg.k_fb * m_ext_z;
    let (m, sat) = saturate(robot + contact, cfg.moment_limit);
    (m, sat, robot, contact)
}

/// Robot feedforward moment from the pilot's forceplate reading.
pub fn ff_moment(m_zh: f64, params: &PhysicalParams, cfg: &FeedbackConfig) -> f64 {
    if cfg.enable_ff_moment {
        params.i_zr / params.i_zh * m_zh
    } else {
        0.0
    }
}

/// Full feedback for one tick.
pub fn compute_feedback(
    xi_r: f64,
    xi_h: f64,
    f_ext_x: f64,
    m_zr: f64,
    m_ext_z: f64,
    params: &PhysicalParams,
    cfg: &FeedbackConfig,
) -> HapticFeedback {
    let (f_xh, force_sat, dcm_sync, contact_force) = force_feedback(xi_r, xi_h, f_ext_x, params, cfg);
    let (m_zh_fb, moment_sat, robot_moment, contact_moment) = moment_feedback(m_zr, m_ext_z, params, cfg);
    HapticFeedback {
        f_xh,
        m_zh_fb,
        saturated: HapticSaturation {
            force: force_sat,
            moment: moment_sat,
        },
        components: FeedbackComponents {
            dcm_sync,
            contact_force,
            robot_moment,
            contact_moment,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub moment: Vector3<f64>,
    /// Estimated hand forces (zero for hands not in contact).
    pub forces: [Vector3<f64>; 2],
    pub damped: bool,
}

/// `Σ_j λ_j · r_j × (J_jᵀ)⁺ τ_j` over both hands, `[right, left]` order.
pub fn estimate_external_moment(
    contact: &ContactState,
    tau_m: &[Vector4<f64>; 2],
    jacobians: &[Matrix3x4<f64>; 2],
) -> MomentEstimate {
    let mut out = MomentEstimate {
        moment: Vector3::zeros(),
        forces: [Vector3::zeros(); 2],
        damped: false,
    };
    for side in Side::BOTH {
        let i = side.index();
        if !contact.state.includes(side) {
            continue;
        }
        let (pinv, damped) = jacobian_transpose_pinv(&jacobians[i]);
        let force = pinv * tau_m[i];
        out.forces[i] = force;
        out.damped |= damped;
        out.moment += Vector3::from(contact.points[i]).cross(&force);
    }
    out
}
