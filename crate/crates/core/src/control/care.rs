//! Continuous-time algebraic Riccati equation and LQR synthesis.
//!
//! The stabilizing solution is found with the matrix sign function of the
//! Hamiltonian (determinant-scaled Newton iteration), then polished with a
//! few Newton–Kleinman steps so the residual sits at rounding level.

use nalgebra::DMatrix;

use crate::error::{Result, TeleopError};

const SIGN_TOL: f64 = 1e-13;
const SIGN_MAX_ITER: usize = 100;
const KLEINMAN_STEPS: usize = 4;

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| r.clone() * f64::NAN);
    a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    let ok = a.is_square()
        && b.nrows() == n
        && q.shape() == (n, n)
        && r.shape() == (m, m)
        && n > 0
        && m > 0;
    if !ok {
        return Err(TeleopError::Synthesis("inconsistent matrix dimensions".into()));
    }
    let finite = [a, b, q, r].iter().all(|mat| mat.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(TeleopError::Synthesis("non-finite weights or model".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(TeleopError::Synthesis("R must be positive definite".into()));
    }
    if q.symmetric_eigenvalues().min() < -1e-12 * q.norm().max(1.0) {
        return Err(TeleopError::Synthesis("Q must be positive semidefinite".into()));
    }
    Ok(())
}

fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows() as f64;
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu
            .try_inverse()
            .filter(|_| det.is_finite() && det != 0.0)
            .ok_or_else(|| {
                TeleopError::Synthesis("Hamiltonian has eigenvalues on the imaginary axis".into())
            })?;
        let c = det.abs().powf(1.0 / n);
        let next = (&z / c + inv * c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if delta <= SIGN_TOL * z.norm() {
            return Ok(z);
        }
    }
    Err(TeleopError::Synthesis(
        "sign iteration did not converge (pair not stabilizable or not detectable)".into(),
    ))
}

/// Solve `Aᵀ X + X A = −C`.
fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-c).as_slice());
    let x = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Stabilizing solution `P` of the CARE.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_shapes(a, b, q, r)?;
    let n = a.nrows();
    let r_inv = r.clone().try_inverse().expect("checked positive definite");
    let g = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let mut p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| TeleopError::Synthesis(e.to_string()))?;
    p = (&p + p.transpose()) * 0.5;

    // Newton–Kleinman polishing from the (already stabilizing) estimate.
    for _ in 0..KLEINMAN_STEPS {
        let k = &r_inv * b.transpose() * &p;
        let closed = a - b * &k;
        if max_real_eigenvalue(&closed) >= 0.0 {
            break;
        }
        let c = q + k.transpose() * r * &k;
        match lyapunov(&closed, &c) {
            Some(next) if next.iter().all(|v| v.is_finite()) => {
                let before = care_residual(a, b, q, r, &p).norm();
                let after = care_residual(a, b, q, r, &next).norm();
                if after <= before {
                    p = next;
                } else {
                    break;
                }
            }
            _ => break,
        }
    }

    let k = &r_inv * b.transpose() * &p;
    if !p.iter().all(|v| v.is_finite()) || max_real_eigenvalue(&(a - b * k)) >= 0.0 {
        return Err(TeleopError::Synthesis(
            "no stabilizing solution (pair not stabilizable)".into(),
        ));
    }
    Ok(p)
}

/// LQR gain `K = R⁻¹BᵀP` together with `P`.
pub fn lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = solve_care(a, b, q, r)?;
    let r_inv = r.clone().try_inverse().expect("checked positive definite");
    let k = r_inv * b.transpose() * &p;
    Ok((k, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn stable_scalar_root() {
        let p = solve_care(&scalar(-1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        // p² + 2p − 1 = 0
        assert_abs_diff_eq!(p[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn integrator_root() {
        let (k, p) = lqr(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn unstable_scalar_root() {
        // a = 2: p² − 4p − 1 = 0, stabilizing root 2 + √5.
        let p = solve_care(&scalar(2.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 2.0 + 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn double_integrator_closed_form() {
        // q = diag(1, 0), r = 1: b² = 1, a = b·c, c² = 2b, so P = [[√2, 1], [1, √2]].
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = solve_care(&a, &b, &q, &scalar(1.0)).unwrap();
        let s2 = 2f64.sqrt();
        let expect = DMatrix::from_row_slice(2, 2, &[s2, 1.0, 1.0, s2]);
        assert!((p - expect).amax() < 1e-12);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        assert!(matches!(
            solve_care(&a, &b, &q, &scalar(1.0)),
            Err(TeleopError::Synthesis(_))
        ));
    }

    #[test]
    fn bad_weights_are_rejected() {
        assert!(solve_care(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(0.0)).is_err());
        assert!(solve_care(&scalar(1.0), &scalar(1.0), &scalar(-1.0), &scalar(1.0)).is_err());
    }
}
