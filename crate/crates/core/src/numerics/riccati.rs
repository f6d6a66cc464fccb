use nalgebra::DMatrix;

use super::spectral_radius;
use crate::error::{Error, Result};

pub const DARE_TOL: f64 = 1e-10;
pub const DARE_MAX_ITER: usize = 100_000;

/// One step of `P ← AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA + Q`.
pub fn riccati_step(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let at_p = a.transpose() * p;
    let s = r + b.transpose() * p * b;
    let gain = s
        .lu()
        .solve(&(b.transpose() * p * a))
        .ok_or_else(|| Error::InvalidParameter("R + BᵀPB is singular".into()))?;
    let next = &at_p * a - &at_p * b * gain + q;
    Ok((&next + next.transpose()) * 0.5)
}

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration started at `P = Q`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "DARE with A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let mut p = q.clone();
    for it in 1..=DARE_MAX_ITER {
        let next = riccati_step(&p, a, b, q, r)?;
        let change = (&next - &p).norm();
        let scale = next.norm().max(1.0);
        if !change.is_finite() || scale > 1e15 {
            return Err(Error::NoConvergence { iterations: it });
        }
        p = next;
        if change <= DARE_TOL * scale {
            let k = (r + b.transpose() * &p * b)
                .lu()
                .solve(&(b.transpose() * &p * a))
                .ok_or(Error::NoConvergence { iterations: it })?;
            if spectral_radius(&(a - b * k)) >= 1.0 {
                return Err(Error::NoConvergence { iterations: it });
            }
            return Ok(p);
        }
    }
    Err(Error::NoConvergence {
        iterations: DARE_MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_with_zero_dynamics() {
        let p = solve_dare(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_closed_form() {
        // P² − 0.25 P − 1 = 0
        let p = solve_dare(&dmatrix![0.5], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        let root = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert_relative_eq!(p[(0, 0)], root, epsilon = 1e-9);
    }

    #[test]
    fn no_input_reduces_to_lyapunov_series() {
        let a = dmatrix![0.5, 0.2; -0.1, 0.3];
        let b = DMatrix::zeros(2, 1);
        let q = DMatrix::identity(2, 2);
        let p = solve_dare(&a, &b, &q, &dmatrix![1.0]).unwrap();
        let mut series = DMatrix::zeros(2, 2);
        let mut ak = DMatrix::<f64>::identity(2, 2);
        for _ in 0..200 {
            series += ak.transpose() * &q * &ak;
            ak = &ak * &a;
        }
        assert_relative_eq!(p, series, epsilon = 1e-9);
    }

    #[test]
    fn unstable_plant_fixed_point() {
        let a = dmatrix![1.1, 1.0; 0.0, 0.95];
        let b = dmatrix![0.0; 1.0];
        let q = DMatrix::identity(2, 2);
        let r = dmatrix![0.5];
        let p = solve_dare(&a, &b, &q, &r).unwrap();
        let again = riccati_step(&p, &a, &b, &q, &r).unwrap();
        assert!((&again - &p).norm() <= 1e-8 * p.norm());
        assert!(p.clone().symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn unstabilizable_fails() {
        let a = dmatrix![1.5, 0.0; 0.0, 0.5];
        let b = dmatrix![0.0; 1.0];
        let res = solve_dare(&a, &b, &DMatrix::identity(2, 2), &dmatrix![1.0]);
        assert!(matches!(res, Err(Error::NoConvergence { .. })));
    }
}
