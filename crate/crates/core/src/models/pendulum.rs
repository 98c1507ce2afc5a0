//! Cart-pole sagittal model and the divergent component of motion.
//!
//! State order is `[x, θ, ẋ, θ̇]`. θ > 0 means the body leans forward (+x); a
//! positive wheel force accelerates the cart forward and tips the body back.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::config::PhysicalParams;
use crate::error::{ensure_finite, Result, TeleopError};
use crate::state::RobotState;

/// `sqrt(g / h)`.
pub fn natural_frequency(h: f64, g: f64) -> Result<f64> {
    if !(h > 0.0 && g > 0.0) || !h.is_finite() || !g.is_finite() {
        return Err(TeleopError::Domain(format!(
            "natural frequency needs h > 0 and g > 0 (h={h}, g={g})"
        )));
    }
    Ok((g / h).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmValue {
    pub xi: f64,
    pub omega: f64,
}

/// `ξ = θ + θ̇/ω`.
pub fn dcm(theta: f64, thetadot: f64, omega: f64) -> Result<DcmValue> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(TeleopError::Domain(format!(
            "DCM needs omega > 0 (got {omega})"
        )));
    }
    Ok(DcmValue {
        xi: theta + thetadot / omega,
        omega,
    })
}

/// Linearization about the upright equilibrium: `q̇ = A q + B u` with a single
/// horizontal wheel force input.
pub fn cartpole_linear_dynamics(params: &PhysicalParams) -> Result<(Matrix4<f64>, Vector4<f64>)> {
    params.validate()?;
    let m = params.pole_mass();
    let l = params.h_r;
    let mass = Matrix2::new(
        params.m_r,
        m * l,
        m * l,
        m * l * l + params.pole_inertia,
    );
    let inv = mass
        .try_inverse()
        .ok_or_else(|| TeleopError::Domain("singular cart-pole mass matrix".into()))?;
    let pitch = inv * Vector2::new(0.0, m * params.g * l);
    let input = inv * Vector2::new(1.0, 0.0);

    let mut a = Matrix4::zeros();
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    a[(2, 1)] = pitch[0];
    a[(3, 1)] = pitch[1];
    let b = Vector4::new(0.0, 0.0, input[0], input[1]);
    Ok((a, b))
}

/// `(ẍ, θ̈)` of the nonlinear cart-pole. `disturbance` is a horizontal force
/// applied at the body's CoM.
pub fn cartpole_accel(
    params: &PhysicalParams,
    theta: f64,
    thetadot: f64,
    wheel_force: f64,
    disturbance: f64,
) -> (f64, f64) {
    let m = params.pole_mass();
    let l = params.h_r;
    let (s, c) = theta.sin_cos();
    let a11 = params.m_r;
    let a12 = m * l * c;
    let a22 = m * l * l + params.pole_inertia;
    let r1 = wheel_force + disturbance + m * l * thetadot * thetadot * s;
    let r2 = m * params.g * l * s + disturbance * l * c;
    let det = a11 * a22 - a12 * a12;
    ((a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det)
}

/// One RK4 step of the sagittal states; yaw and arm states are carried over.
pub fn cartpole_nonlinear_step(
    state: &RobotState,
    wheel_force: f64,
    disturbance: f64,
    params: &PhysicalParams,
    dt: f64,
) -> Result<RobotState> {
    ensure_finite("cart-pole step", &[wheel_force, disturbance, dt])?;
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(TeleopError::Domain(format!("dt must lie in (0, 0.01], got {dt}")));
    }
    let f = |s: Vector4<f64>| {
        let (xdd, tdd) = cartpole_accel(params, s[1], s[3], wheel_force, disturbance);
        Vector4::new(s[2], s[3], xdd, tdd)
    };
    let s0 = Vector4::new(state.x, state.theta, state.xdot, state.thetadot);
    let k1 = f(s0);
    let k2 = f(s0 + k1 * (0.5 * dt));
    let k3 = f(s0 + k2 * (0.5 * dt));
    let k4 = f(s0 + k3 * dt);
    let s1 = s0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    ensure_finite("cart-pole state", s1.as_slice())?;
    Ok(RobotState {
        x: s1[0],
        theta: s1[1],
        xdot: s1[2],
        thetadot: s1[3],
        ..*state
    })
}

/// Mechanical energy of the cart-pole with the wheel axle as height datum.
pub fn cartpole_energy(state: &RobotState, params: &PhysicalParams) -> f64 {
    let m = params.pole_mass();
    let l = params.h_r;
    let c = state.theta.cos();
    0.5 * params.m_r * state.xdot * state.xdot
        + m * l * state.xdot * state.thetadot * c
        + 0.5 * (m * l * l + params.pole_inertia) * state.thetadot * state.thetadot
        + m * params.g * l * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn frequency_examples() {
        assert_abs_diff_eq!(natural_frequency(9.81, 9.81).unwrap(), 1.0);
        assert_abs_diff_eq!(
            natural_frequency(0.5, 9.81).unwrap(),
            19.62f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(natural_frequency(0.5, 9.81).unwrap(), 4.42945, epsilon = 1e-5);
        assert!(natural_frequency(0.0, 9.81).is_err());
        assert!(natural_frequency(1.0, -1.0).is_err());
    }

    #[test]
    fn dcm_examples() {
        assert_eq!(dcm(0.0, 0.0, 3.0).unwrap().xi, 0.0);
        assert_abs_diff_eq!(dcm(0.1, 0.2, 4.42945).unwrap().xi, 0.145152, epsilon = 1e-6);
        assert_abs_diff_eq!(dcm(0.1, -0.442945, 4.42945).unwrap().xi, 0.0, epsilon = 1e-15);
        assert!(dcm(0.1, 0.1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn dcm_is_linear(
            t1 in -1.0..1.0f64, r1 in -5.0..5.0f64,
            t2 in -1.0..1.0f64, r2 in -5.0..5.0f64,
            a in -3.0..3.0f64, b in -3.0..3.0f64, w in 0.5..10.0f64,
        ) {
            let lhs = dcm(a * t1 + b * t2, a * r1 + b * r2, w).unwrap().xi;
            let rhs = a * dcm(t1, r1, w).unwrap().xi + b * dcm(t2, r2, w).unwrap().xi;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn linear_model_structure() {
        let p = PhysicalParams::default();
        let (a, b) = cartpole_linear_dynamics(&p).unwrap();
        assert_eq!(a.fixed_view::<2, 2>(0, 2).into_owned(), Matrix2::identity());
        let eig = a.complex_eigenvalues();
        let positive: Vec<_> = eig.iter().filter(|e| e.re > 1e-9).collect();
        assert_eq!(positive.len(), 1);
        let omega_r = natural_frequency(p.h_r, p.g).unwrap();
        assert!(positive[0].re >= omega_r);
        assert_abs_diff_eq!(positive[0].re * positive[0].re, a[(3, 1)], epsilon = 1e-9);
        assert!(b[3] < 0.0 && b[2] > 0.0);
    }

    #[test]
    fn numeric_linearization_matches() {
        let p = PhysicalParams::default();
        let (a, b) = cartpole_linear_dynamics(&p).unwrap();
        let h = 1e-6;
        let accel = |th: f64, thd: f64, u: f64| {
            let (xdd, tdd) = cartpole_accel(&p, th, thd, u, 0.0);
            Vector2::new(xdd, tdd)
        };
        let d_theta = (accel(h, 0.0, 0.0) - accel(-h, 0.0, 0.0)) / (2.0 * h);
        let d_rate = (accel(0.0, h, 0.0) - accel(0.0, -h, 0.0)) / (2.0 * h);
        let d_u = (accel(0.0, 0.0, h) - accel(0.0, 0.0, -h)) / (2.0 * h);
        for r in 0..2 {
            assert!((d_theta[r] - a[(2 + r, 1)]).abs() < 1e-6);
            assert!((d_rate[r] - a[(2 + r, 3)]).abs() < 1e-6);
            assert!((d_u[r] - b[2 + r]).abs() < 1e-6);
        }
    }

    #[test]
    fn rest_is_equilibrium() {
        let p = PhysicalParams::default();
        let mut s = RobotState::default();
        for _ in 0..1000 {
            s = cartpole_nonlinear_step(&s, 0.0, 0.0, &p, 1e-3).unwrap();
        }
        assert_eq!(s, RobotState::default());
    }

    #[test]
    fn small_lean_diverges() {
        let p = PhysicalParams::default();
        let mut s = RobotState {
            theta: 0.01,
            ..Default::default()
        };
        let mut prev = s.theta.abs();
        for _ in 0..300 {
            s = cartpole_nonlinear_step(&s, 0.0, 0.0, &p, 1e-3).unwrap();
            assert!(s.theta.abs() > prev);
            prev = s.theta.abs();
        }
    }

    #[test]
    fn undriven_energy_is_conserved() {
        let p = PhysicalParams::default();
        let mut s = RobotState {
            theta: 0.2,
            xdot: 0.1,
            ..Default::default()
        };
        let e0 = cartpole_energy(&s, &p);
        for _ in 0..10_000 {
            s = cartpole_nonlinear_step(&s, 0.0, 0.0, &p, 1e-3).unwrap();
        }
        let drift = (cartpole_energy(&s, &p) - e0).abs() / e0.abs();
        assert!(drift < 1e-6, "relative drift {drift}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PhysicalParams::default();
        let s = RobotState::default();
        assert!(cartpole_nonlinear_step(&s, f64::NAN, 0.0, &p, 1e-3).is_err());
        assert!(cartpole_nonlinear_step(&s, 0.0, 0.0, &p, 0.02).is_err());
    }
}
