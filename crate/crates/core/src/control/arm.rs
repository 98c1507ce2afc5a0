//! Arm controllers: joint PD, Cartesian impedance with a null-space posture
//! task, and the torque crossfade between them.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3, Vector4};

use crate::config::ControllerGains;
use crate::models::arm::{arm_dynamics_terms, arm_fk, arm_jacobian, gravity_torque, ArmModel};
use crate::state::JointVec;

/// Tikhonov term added to a 3×3 Gram matrix near singularities.
pub const DAMPING: f64 = 1e-6;
/// Eigenvalue ratio of the Gram matrix below which damping is applied.
const SINGULAR_RATIO: f64 = 1e-9;

/// Inverse of a symmetric positive semidefinite 3×3, damped when near
/// singular. Returns the inverse and whether damping was used.
pub fn damped_inverse(gram: &Matrix3<f64>) -> (Matrix3<f64>, bool) {
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let singular = !(hi > 0.0) || lo <= SINGULAR_RATIO * hi;
    let target = if singular {
        gram + Matrix3::identity() * DAMPING
    } else {
        *gram
    };
    match target.try_inverse() {
        Some(inv) => (inv, singular),
        None => ((gram + Matrix3::identity() * DAMPING).try_inverse().unwrap_or_else(Matrix3::zeros), true),
    }
}

/// `(Jᵀ)⁺ = (J Jᵀ)⁻¹ J`, mapping joint torque to hand force. Away from
/// singularities it is formed from a QR of `Jᵀ`, which avoids squaring the
/// condition number.
pub fn jacobian_transpose_pinv(j: &Matrix3x4<f64>) -> (Matrix3x4<f64>, bool) {
    let (inv, damped) = damped_inverse(&(j * j.transpose()));
    if !damped {
        let qr = j.transpose().qr();
        if let Some(r_inv) = qr.r().try_inverse() {
            return (r_inv * qr.q().transpose(), false);
        }
    }
    (inv * j, damped)
}

/// Dynamically consistent null-space projector `I − Jᵀ(J M⁻¹ Jᵀ)⁻¹ J M⁻¹`.
pub fn null_space_projector(j: &Matrix3x4<f64>, mass: &Matrix4<f64>) -> (Matrix4<f64>, bool) {
    let m_inv = mass
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| mass.try_inverse().unwrap_or_else(Matrix4::identity));
    let jt: Matrix4x3<f64> = j.transpose();
    let (lambda, damped) = damped_inverse(&(j * m_inv * jt));
    (Matrix4::identity() - jt * lambda * j * m_inv, damped)
}

/// `τ = K_p(q_des − q) − K_d q̇`.
pub fn joint_pd_control(q: &JointVec, qd: &JointVec, q_des: &JointVec, gains: &ControllerGains) -> Vector4<f64> {
    Vector4::from_fn(|i, _| gains.kp_joint[i] * (q_des[i] - q[i]) - gains.kd_joint[i] * qd[i])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceOutput {
    pub tau: Vector4<f64>,
    /// Spring-damper force at the hand.
    pub force: Vector3<f64>,
    pub null_torque: Vector4<f64>,
    /// The projector needed Tikhonov damping.
    pub damped: bool,
}

/// `τ = Jᵀ F_s + G(q) + τ_N`, with `F_s = K_x(x_des − x) − K_dx ẋ` and
/// `τ_N = ε·P(q)·[K_p(q_des − q) − K_d q̇]`. Pass `q_null = None` to disable
/// the posture task.
pub fn impedance_control(
    q: &JointVec,
    qd: &JointVec,
    x_des: &Vector3<f64>,
    q_null: Option<&JointVec>,
    model: &ArmModel,
    gains: &ControllerGains,
) -> ImpedanceOutput {
    let j = arm_jacobian(q, model);
    let x = arm_fk(q, model);
    let xdot = j * Vector4::from(*qd);
    let kx = Vector3::from(gains.k_x);
    let kdx = Vector3::from(gains.k_dx);
    let force = kx.component_mul(&(x_des - x)) - kdx.component_mul(&xdot);
    let gravity = if gains.gravity_comp {
        gravity_torque(q, model)
    } else {
        Vector4::zeros()
    };
    let (null_torque, damped) = match q_null {
        Some(q_des) if gains.epsilon > 0.0 => {
            let dynamics = arm_dynamics_terms(q, qd, model);
            let (proj, damped) = null_space_projector(&j, &dynamics.mass);
            (proj * joint_pd_control(q, qd, q_des, gains) * gains.epsilon, damped)
        }
        _ => (Vector4::zeros(), false),
    };
    ImpedanceOutput {
        tau: j.transpose() * force + gravity + null_torque,
        force,
        null_torque,
        damped,
    }
}

/// `(1 − α)·τ_P + α·τ_D`.
pub fn blend_torque(tau_p: &Vector4<f64>, tau_d: &Vector4<f64>, alpha: f64) -> Vector4<f64> {
    if alpha <= 0.0 {
        *tau_p
    } else if alpha >= 1.0 {
        *tau_d
    } else {
        tau_p * (1.0 - alpha) + tau_d * alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::arm::{arm_rk4_step, kinetic_energy, mass_matrix};
    use crate::state::ArmState;
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn joint_pd_terms() {
        let g = ControllerGains::default();
        let q = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(joint_pd_control(&q, &[0.0; 4], &q, &g), Vector4::zeros());
        let mut q_des = q;
        q_des[2] += 1.0;
        let tau = joint_pd_control(&q, &[0.0; 4], &q_des, &g);
        assert_abs_diff_eq!(tau, Vector4::new(0.0, 0.0, g.kp_joint[2], 0.0), epsilon = 1e-12);
    }

    #[test]
    fn joint_pd_with_gravity_comp_converges() {
        let m = ArmModel::robot_default();
        let g = ControllerGains::default();
        let q_des = [0.4, 1.2, -0.3, 0.9];
        let mut s = ArmState::default();
        let mut tau = Vector4::zeros();
        for step in 0..5000 {
            if step % 5 == 0 {
                tau = joint_pd_control(&s.q, &s.qd, &q_des, &g) + gravity_torque(&s.q, &m);
            }
            s = arm_rk4_step(&s, &m, 1e-3, |_| tau);
        }
        for i in 0..4 {
            assert!((s.q[i] - q_des[i]).abs() < 1e-3, "joint {i}: {:?}", s.q);
        }
    }

    #[test]
    fn impedance_at_rest_is_gravity_comp() {
        let m = ArmModel::robot_default();
        let g = ControllerGains::default();
        let q = [0.3, 1.0, 0.2, 0.7];
        let x = arm_fk(&q, &m);
        let out = impedance_control(&q, &[0.0; 4], &x, None, &m, &g);
        assert_eq!(out.tau, gravity_torque(&q, &m));
    }

    #[test]
    fn static_deflection_force() {
        let m = ArmModel::robot_default();
        let g = ControllerGains::default();
        let q = [0.3, 1.0, 0.2, 0.7];
        let x_des = arm_fk(&q, &m) + Vector3::new(0.01, 0.0, 0.0);
        let out = impedance_control(&q, &[0.0; 4], &x_des, Some(&q), &m, &g);
        let (pinv, damped) = jacobian_transpose_pinv(&arm_jacobian(&q, &m));
        assert!(!damped);
        let f = pinv * (out.tau - gravity_torque(&q, &m));
        assert_abs_diff_eq!(f, Vector3::new(g.k_x[0] * 0.01, 0.0, 0.0), epsilon = 1e-10);
    }

    #[test]
    fn projector_removes_hand_acceleration() {
        let m = ArmModel::robot_default();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let q: JointVec = [0, 1, 2, 3].map(|i| {
                let [lo, hi] = m.limits[i];
                rng.gen_range(lo..=hi)
            });
            let v = Vector4::from_fn(|_, _| rng.gen_range(-5.0..5.0));
            let j = arm_jacobian(&q, &m);
            let mass = mass_matrix(&q, &m);
            let (p, damped) = null_space_projector(&j, &mass);
            if damped {
                continue;
            }
            let acc = j * mass.cholesky().unwrap().solve(&(p * v));
            assert!(acc.norm() < 1e-8 * v.norm());
        }
    }

    #[test]
    fn singular_pose_is_damped() {
        let m = ArmModel::robot_default();
        let j = arm_jacobian(&[0.0; 4], &m);
        let (_, damped) = null_space_projector(&j, &mass_matrix(&[0.0; 4], &m));
        assert!(damped);
        assert!(jacobian_transpose_pinv(&j).1);
    }

    #[test]
    fn impedance_energy_never_grows() {
        let m = ArmModel::robot_default();
        let g = ControllerGains::default();
        let q0 = [0.2, 1.1, 0.3, 0.8];
        let x_des = arm_fk(&q0, &m) + Vector3::new(0.03, -0.02, 0.04);
        let energy = |s: &ArmState| {
            let e = x_des - arm_fk(&s.q, &m);
            0.5 * e.dot(&Vector3::from(g.k_x).component_mul(&e)) + kinetic_energy(s, &m)
        };
        let mut s = ArmState { q: q0, qd: [0.5, -0.3, 0.2, 0.1] };
        let mut prev = energy(&s);
        for _ in 0..3000 {
            s = arm_rk4_step(&s, &m, 1e-3, |st| {
                impedance_control(&st.q, &st.qd, &x_des, None, &m, &g).tau
            });
            let e = energy(&s);
            assert!(e <= prev + 1e-5, "energy rose {prev} -> {e}");
            prev = e;
        }
    }

    #[test]
    fn blend_examples() {
        let tp = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let td = Vector4::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(blend_torque(&tp, &td, 0.0), tp);
        assert_eq!(blend_torque(&tp, &td, 1.0), td);
        assert_eq!(blend_torque(&tp, &td, 0.5), Vector4::new(0.5, 0.5, 0.0, 0.0));
    }
}
