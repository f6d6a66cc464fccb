use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    #[default]
    Zoh,
    Euler,
}

const SERIES_TOL: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 200;

/// Matrix exponential by a truncated Taylor series. The argument is scaled
/// to unit norm first and the result squared back.
fn expm_series(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let norm = m.norm();
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("non-finite matrix in discretization".into()));
    }
    let squarings = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..=SERIES_MAX_TERMS {
        term = &term * &scaled / j as f64;
        sum += &term;
        if term.norm() <= SERIES_TOL * sum.norm() {
            let mut out = sum;
            for _ in 0..squarings {
                out = &out * &out;
            }
            return Ok(out);
        }
    }
    Err(Error::NoConvergence { iterations: SERIES_MAX_TERMS })
}

/// Discretizes `ẋ = Ax + Bu` with sample time `ts`, returning `(Ad, Bd)`.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64, method: Discretization) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, q) = (a.nrows(), b.ncols());
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!("A {:?}, B {:?}", a.shape(), b.shape())));
    }
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidParameter(format!("sample time {ts}")));
    }
    match method {
        Discretization::Euler => Ok((DMatrix::identity(n, n) + a * ts, b * ts)),
        Discretization::Zoh => {
            let mut m = DMatrix::zeros(n + q, n + q);
            m.view_mut((0, 0), (n, n)).copy_from(&(a * ts));
            m.view_mut((0, n), (n, q)).copy_from(&(b * ts));
            let e = expm_series(&m)?;
            Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, q)).into_owned()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_zoh() {
        let (ad, bd) = discretize(&dmatrix![-0.5], &dmatrix![2.0], 0.3, Discretization::Zoh).unwrap();
        assert_relative_eq!(ad[(0, 0)], (-0.15f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(bd[(0, 0)], 2.0 * (1.0 - (-0.15f64).exp()) / 0.5, epsilon = 1e-13);
    }

    #[test]
    fn matches_library_exponential() {
        let a = dmatrix![-0.3, 2.0, 0.0; -1.5, -0.2, 0.7; 0.0, 0.4, -3.0];
        let b = dmatrix![1.0; 0.0; 2.0];
        for ts in [0.01, 1.0, 4.0] {
            let (ad, _) = discretize(&a, &b, ts, Discretization::Zoh).unwrap();
            let reference = (&a * ts).exp();
            assert!((ad - &reference).norm() <= 1e-10 * reference.norm().max(1.0));
        }
    }

    #[test]
    fn integrator_is_exact() {
        let (ad, bd) = discretize(&dmatrix![0.0, 1.0; 0.0, 0.0], &dmatrix![0.0; 1.0], 2.0, Discretization::Zoh).unwrap();
        assert_relative_eq!(ad, dmatrix![1.0, 2.0; 0.0, 1.0], epsilon = 1e-14);
        assert_relative_eq!(bd, dmatrix![2.0; 2.0], epsilon = 1e-14);
    }

    #[test]
    fn euler() {
        let (ad, bd) = discretize(&dmatrix![-1.0], &dmatrix![1.0], 0.1, Discretization::Euler).unwrap();
        assert_relative_eq!(ad[(0, 0)], 0.9);
        assert_relative_eq!(bd[(0, 0)], 0.1);
        assert!(discretize(&dmatrix![-1.0], &dmatrix![1.0], 0.0, Discretization::Euler).is_err());
    }
}
