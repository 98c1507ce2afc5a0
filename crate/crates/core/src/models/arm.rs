//! Four-joint arm: a spherical shoulder (z-y-z) plus an elbow pitch joint.
//!
//! Frame conventions: positions are expressed in torso-aligned axes (x forward,
//! y left, z up) with the origin at the shoulder. The shoulder chain starts from
//! `base_rotation`, which maps the chain's z axis straight down, so the zero
//! pose is the arm hanging vertically. Joint `q3` bends the forearm about the
//! upper-arm frame's y axis.

use nalgebra::{Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::dual::{Dual4, Scalar};
use crate::config::GRAVITY;
use crate::error::{Result, TeleopError};
use crate::state::{ArmState, JointVec};

/// Inside this angle (rad) of the shoulder's singular axis the first shoulder
/// joint is held at its previous value.
pub const IK_SINGULAR_CONE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub upper_len: f64,
    pub fore_len: f64,
    pub upper_mass: f64,
    pub fore_mass: f64,
    /// CoM location as a fraction of each link's length from its proximal joint.
    pub upper_com: f64,
    pub fore_com: f64,
    pub link_radius: f64,
    /// Reflected rotor inertia per joint, kg·m².
    pub armature: JointVec,
    pub limits: [[f64; 2]; 4],
    pub base_rotation: [[f64; 3]; 3],
    pub g: f64,
}

const HANGING_BASE: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
const PI: f64 = std::f64::consts::PI;

impl ArmModel {
    pub fn robot_default() -> Self {
        Self {
            upper_len: 0.15,
            fore_len: 0.15,
            upper_mass: 0.4,
            fore_mass: 0.3,
            upper_com: 0.5,
            fore_com: 0.6,
            link_radius: 0.02,
            armature: [0.01; 4],
            limits: [[-PI, PI], [0.0, PI], [-PI, PI], [0.0, 2.6]],
            base_rotation: HANGING_BASE,
            g: GRAVITY,
        }
    }

    pub fn human_default() -> Self {
        Self {
            upper_len: 0.30,
            fore_len: 0.30,
            upper_mass: 2.0,
            fore_mass: 1.5,
            upper_com: 0.45,
            fore_com: 0.45,
            link_radius: 0.045,
            armature: [0.0; 4],
            ..Self::robot_default()
        }
    }

    pub fn set_upper_len(&mut self, len: f64) {
        self.upper_len = len;
    }

    pub fn set_fore_len(&mut self, len: f64) {
        self.fore_len = len;
    }

    pub fn reach(&self) -> f64 {
        self.upper_len + self.fore_len
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.upper_len,
            self.fore_len,
            self.upper_mass,
            self.fore_mass,
            self.link_radius,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(TeleopError::InvalidParam {
                name: "arm".into(),
                reason: "link lengths, masses and radius must be strictly positive".into(),
            });
        }
        if self.limits.iter().any(|[lo, hi]| !(lo <= hi)) {
            return Err(TeleopError::InvalidParam {
                name: "arm limits".into(),
                reason: "lower bound above upper bound".into(),
            });
        }
        Ok(())
    }

    pub fn clamp_joints(&self, q: JointVec) -> JointVec {
        let mut out = q;
        for (v, [lo, hi]) in out.iter_mut().zip(self.limits) {
            *v = v.clamp(lo, hi);
        }
        out
    }

    /// Clamp positions to the limits and zero any velocity pushing further out.
    pub fn clamp_state(&self, state: ArmState) -> ArmState {
        let mut out = state;
        for i in 0..4 {
            let [lo, hi] = self.limits[i];
            if out.q[i] <= lo {
                out.q[i] = lo;
                out.qd[i] = out.qd[i].max(0.0);
            } else if out.q[i] >= hi {
                out.q[i] = hi;
                out.qd[i] = out.qd[i].min(0.0);
            }
        }
        out
    }

    fn link_inertias(&self) -> ([f64; 3], [f64; 3]) {
        let rod = |m: f64, l: f64| {
            let perp = m * l * l / 12.0;
            [perp, perp, 0.5 * m * self.link_radius * self.link_radius]
        };
        (
            rod(self.upper_mass, self.upper_len),
            rod(self.fore_mass, self.fore_len),
        )
    }
}

type V3<T> = [T; 3];
type M3<T> = [[T; 3]; 3];

fn matmul<T: Scalar>(a: &M3<T>, b: &M3<T>) -> M3<T> {
    let mut out = [[T::cst(0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn col<T: Scalar>(m: &M3<T>, j: usize) -> V3<T> {
    [m[0][j], m[1][j], m[2][j]]
}

fn cross<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot<T: Scalar>(a: V3<T>, b: V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale<T: Scalar>(a: V3<T>, s: T) -> V3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn rot_z<T: Scalar>(a: T) -> M3<T> {
    let (s, c) = (a.sin(), a.cos());
    let (z, o) = (T::cst(0.0), T::cst(1.0));
    [[c, -s, z], [s, c, z], [z, z, o]]
}

fn rot_y<T: Scalar>(a: T) -> M3<T> {
    let (s, c) = (a.sin(), a.cos());
    let (z, o) = (T::cst(0.0), T::cst(1.0));
    [[c, z, s], [z, o, z], [-s, z, c]]
}

fn lift<T: Scalar>(m: &[[f64; 3]; 3]) -> M3<T> {
    m.map(|row| row.map(T::cst))
}

/// Frames and points of the chain at one configuration.
struct Chain<T> {
    upper: M3<T>,
    fore: M3<T>,
    axes: [V3<T>; 4],
    elbow: V3<T>,
    hand: V3<T>,
    com_upper: V3<T>,
    com_fore: V3<T>,
}

fn chain<T: Scalar>(model: &ArmModel, q: [T; 4]) -> Chain<T> {
    let base: M3<T> = lift(&model.base_rotation);
    let r1 = matmul(&base, &rot_z(q[0]));
    let r2 = matmul(&r1, &rot_y(q[1]));
    let upper = matmul(&r2, &rot_z(q[2]));
    let fore = matmul(&upper, &rot_y(q[3]));
    let axes = [col(&r1, 2), col(&r1, 1), col(&r2, 2), col(&upper, 1)];
    let upper_dir = col(&upper, 2);
    let fore_dir = col(&fore, 2);
    let elbow = scale(upper_dir, T::cst(model.upper_len));
    let hand = add(elbow, scale(fore_dir, T::cst(model.fore_len)));
    let com_upper = scale(upper_dir, T::cst(model.upper_com * model.upper_len));
    let com_fore = add(
        elbow,
        scale(fore_dir, T::cst(model.fore_com * model.fore_len)),
    );
    Chain {
        upper,
        fore,
        axes,
        elbow,
        hand,
        com_upper,
        com_fore,
    }
}

fn mass_matrix_generic<T: Scalar>(model: &ArmModel, q: [T; 4]) -> [[T; 4]; 4] {
    let ch = chain(model, q);
    let zero = [T::cst(0.0); 3];
    let (i_upper, i_fore) = model.link_inertias();

    // Linear and angular Jacobian columns of both link CoMs.
    let mut jv_upper = [zero; 4];
    let mut jv_fore = [zero; 4];
    for j in 0..3 {
        jv_upper[j] = cross(ch.axes[j], ch.com_upper);
        jv_fore[j] = cross(ch.axes[j], ch.com_fore);
    }
    jv_fore[3] = cross(ch.axes[3], sub(ch.com_fore, ch.elbow));
    let jw_upper = [ch.axes[0], ch.axes[1], ch.axes[2], zero];
    let jw_fore = ch.axes;

    // Inertia in torso axes: R diag(I) Rᵀ applied as Rᵀ w, scaled, summed.
    let inertia_form = |r: &M3<T>, diag: [f64; 3], a: V3<T>, b: V3<T>| {
        let mut acc = T::cst(0.0);
        for k in 0..3 {
            let axis = col(r, k);
            acc = acc + T::cst(diag[k]) * dot(axis, a) * dot(axis, b);
        }
        acc
    };

    let mu = T::cst(model.upper_mass);
    let mf = T::cst(model.fore_mass);
    let mut m = [[T::cst(0.0); 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let v = mu * dot(jv_upper[i], jv_upper[j])
                + mf * dot(jv_fore[i], jv_fore[j])
                + inertia_form(&ch.upper, i_upper, jw_upper[i], jw_upper[j])
                + inertia_form(&ch.fore, i_fore, jw_fore[i], jw_fore[j]);
            let v = if i == j { v + T::cst(model.armature[i]) } else { v };
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn potential_generic<T: Scalar>(model: &ArmModel, q: [T; 4]) -> T {
    let ch = chain(model, q);
    T::cst(model.g)
        * (T::cst(model.upper_mass) * ch.com_upper[2] + T::cst(model.fore_mass) * ch.com_fore[2])
}

fn to_vec3(v: V3<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Hand position relative to the shoulder.
pub fn arm_fk(q: &JointVec, model: &ArmModel) -> Vector3<f64> {
    to_vec3(chain(model, *q).hand)
}

/// Elbow position relative to the shoulder.
pub fn arm_elbow(q: &JointVec, model: &ArmModel) -> Vector3<f64> {
    to_vec3(chain(model, *q).elbow)
}

/// Unit vector from shoulder to elbow.
pub fn upper_arm_direction(q: &JointVec, model: &ArmModel) -> Vector3<f64> {
    to_vec3(col(&chain(model, *q).upper, 2))
}

/// Unit vector from elbow to hand.
pub fn forearm_direction(q: &JointVec, model: &ArmModel) -> Vector3<f64> {
    to_vec3(col(&chain(model, *q).fore, 2))
}

/// Hand linear Jacobian, ∂FK/∂q (3×4).
pub fn arm_jacobian(q: &JointVec, model: &ArmModel) -> Matrix3x4<f64> {
    let ch = chain(model, *q);
    let mut j = Matrix3x4::zeros();
    for k in 0..3 {
        j.set_column(k, &to_vec3(cross(ch.axes[k], ch.hand)));
    }
    j.set_column(3, &to_vec3(cross(ch.axes[3], sub(ch.hand, ch.elbow))));
    j
}

pub fn mass_matrix(q: &JointVec, model: &ArmModel) -> Matrix4<f64> {
    let m = mass_matrix_generic(model, *q);
    Matrix4::from_fn(|i, j| m[i][j])
}

/// Gravitational potential energy of both links, shoulder height as datum.
pub fn potential_energy(q: &JointVec, model: &ArmModel) -> f64 {
    potential_generic(model, *q)
}

pub fn kinetic_energy(state: &ArmState, model: &ArmModel) -> f64 {
    let qd = Vector4::from(state.qd);
    0.5 * qd.dot(&(mass_matrix(&state.q, model) * qd))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmDynamics {
    pub mass: Matrix4<f64>,
    /// Christoffel-factored Coriolis matrix; `Ṁ − 2·coriolis_matrix` is skew.
    pub coriolis_matrix: Matrix4<f64>,
    /// Coriolis and centrifugal torque, `coriolis_matrix · q̇`.
    pub coriolis: Vector4<f64>,
    pub gravity: Vector4<f64>,
}

fn dual_q(q: &JointVec) -> [Dual4; 4] {
    [0, 1, 2, 3].map(|i| Dual4::variable(q[i], i))
}

/// M(q), C(q, q̇) and G(q) for one arm.
pub fn arm_dynamics_terms(q: &JointVec, qd: &JointVec, model: &ArmModel) -> ArmDynamics {
    let qdual = dual_q(q);
    let m = mass_matrix_generic(model, qdual);
    let mass = Matrix4::from_fn(|i, j| m[i][j].v);
    // dm(i, j, k) = ∂M_ij/∂q_k
    let dm = |i: usize, j: usize, k: usize| m[i][j].d[k];
    let coriolis_matrix = Matrix4::from_fn(|i, j| {
        (0..4)
            .map(|k| 0.5 * (dm(i, j, k) + dm(i, k, j) - dm(j, k, i)) * qd[k])
            .sum()
    });
    let coriolis = coriolis_matrix * Vector4::from(*qd);
    let gravity = Vector4::from(potential_generic(model, qdual).d);
    ArmDynamics {
        mass,
        coriolis_matrix,
        coriolis,
        gravity,
    }
}

pub fn gravity_torque(q: &JointVec, model: &ArmModel) -> Vector4<f64> {
    Vector4::from(potential_generic(model, dual_q(q)).d)
}

/// Joint accelerations for applied joint torque `tau` (already including any
/// external contributions such as Jᵀ·F).
pub fn forward_dynamics(state: &ArmState, tau: &Vector4<f64>, model: &ArmModel) -> Vector4<f64> {
    let dynamics = arm_dynamics_terms(&state.q, &state.qd, model);
    let rhs = tau - dynamics.coriolis - dynamics.gravity;
    dynamics
        .mass
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| dynamics.mass.lu().solve(&rhs).unwrap_or(Vector4::zeros()))
}

/// One RK4 step where the joint torque may depend on the state at each stage.
pub fn arm_rk4_step<F>(state: &ArmState, model: &ArmModel, dt: f64, mut torque: F) -> ArmState
where
    F: FnMut(&ArmState) -> Vector4<f64>,
{
    let deriv = |s: &ArmState, torque: &mut F| -> (Vector4<f64>, Vector4<f64>) {
        let tau = torque(s);
        (Vector4::from(s.qd), forward_dynamics(s, &tau, model))
    };
    let offset = |s: &ArmState, dq: &Vector4<f64>, dqd: &Vector4<f64>, h: f64| ArmState {
        q: (Vector4::from(s.q) + dq * h).into(),
        qd: (Vector4::from(s.qd) + dqd * h).into(),
    };
    let (k1q, k1v) = deriv(state, &mut torque);
    let s2 = offset(state, &k1q, &k1v, 0.5 * dt);
    let (k2q, k2v) = deriv(&s2, &mut torque);
    let s3 = offset(state, &k2q, &k2v, 0.5 * dt);
    let (k3q, k3v) = deriv(&s3, &mut torque);
    let s4 = offset(state, &k3q, &k3v, dt);
    let (k4q, k4v) = deriv(&s4, &mut torque);
    let dq = (k1q + k2q * 2.0 + k3q * 2.0 + k4q) / 6.0;
    let dv = (k1v + k2v * 2.0 + k3v * 2.0 + k4v) / 6.0;
    offset(state, &dq, &dv, dt)
}

/// Result of retargeting one human arm onto the robot arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointVec,
    /// The elbow direction was inside the singular cone; `q[0]` was held.
    pub singular: bool,
}

/// Spherical-shoulder retargeting: the robot's shoulder-to-elbow unit vector is
/// set equal to the human's, the second axis is the human's projected onto the
/// plane normal to it, and the elbow angle is the human's upper-arm/forearm
/// angle. `prev_q0` is used only inside the singular cone.
pub fn arm_ik_spherical(
    q_human: &JointVec,
    human: &ArmModel,
    robot: &ArmModel,
    prev_q0: f64,
) -> IkSolution {
    let h = chain(human, *q_human);
    let z = col(&h.upper, 2);
    let y_h = col(&h.upper, 1);
    let y_proj = sub(y_h, scale(z, dot(y_h, z)));
    let y = scale(y_proj, 1.0 / dot(y_proj, y_proj).sqrt());
    let x = cross(y, z);

    // Desired rotation in torso axes, then in the robot chain's base frame.
    let torso: M3<f64> = [[x[0], y[0], z[0]], [x[1], y[1], z[1]], [x[2], y[2], z[2]]];
    let b = robot.base_rotation;
    let bt = [0, 1, 2].map(|i| [0, 1, 2].map(|j| b[j][i]));
    let r = matmul(&bt, &torso);

    let sin_q1 = (r[0][2] * r[0][2] + r[1][2] * r[1][2]).sqrt();
    let q1 = sin_q1.atan2(r[2][2]);
    let singular = q1 < IK_SINGULAR_CONE || q1 > PI - IK_SINGULAR_CONE;
    let (q0, q2) = if !singular {
        (r[1][2].atan2(r[0][2]), r[2][1].atan2(-r[2][0]))
    } else if q1 < PI / 2.0 {
        // R ≈ Rz(q0 + q2)
        let sum = r[1][0].atan2(r[0][0]);
        (prev_q0, wrap_angle(sum - prev_q0))
    } else {
        // R ≈ Rz(q0 − q2)·Ry(π)
        let diff = (-r[1][0]).atan2(-r[0][0]);
        (prev_q0, wrap_angle(prev_q0 - diff))
    };

    let fore_dir = col(&h.fore, 2);
    let q3 = dot(z, fore_dir).clamp(-1.0, 1.0).acos();
    IkSolution {
        q: robot.clamp_joints([q0, q1, q2, q3]),
        singular,
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}
