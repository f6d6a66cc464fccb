use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{canonical_sign, rank, Blocks, KERNEL_TOL};
use crate::error::{Error, Result};

/// State/input direction `(x0, g)` of a real transmission zero, normalized so
/// that the stacked vector `[x0; g]` has unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDirection {
    pub x0: DVector<f64>,
    pub g: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct TransmissionZero {
    pub value: Complex64,
    /// Only computed for real zeros.
    pub direction: Option<ZeroDirection>,
}

impl TransmissionZero {
    pub fn is_real(&self) -> bool {
        self.direction.is_some()
    }

    pub fn is_stable(&self) -> bool {
        self.value.norm() < 1.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct ZeroSet {
    pub zeros: Vec<TransmissionZero>,
}

/// Which real zero a synthesis routine should use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "pick", content = "value")]
pub enum ZeroChoice {
    /// Real zero with the largest modulus.
    #[default]
    LargestModulus,
    /// Real zero closest to the given value.
    Nearest(f64),
}

impl ZeroSet {
    pub fn real(&self) -> impl Iterator<Item = &TransmissionZero> {
        self.zeros.iter().filter(|z| z.is_real())
    }

    pub fn unstable(&self) -> impl Iterator<Item = &TransmissionZero> {
        self.zeros.iter().filter(|z| !z.is_stable())
    }

    pub fn select(&self, choice: ZeroChoice) -> Option<&TransmissionZero> {
        let key = |z: &TransmissionZero| match choice {
            ZeroChoice::LargestModulus => -z.value.re.abs(),
            ZeroChoice::Nearest(target) => (z.value.re - target).abs(),
        };
        self.real()
            .min_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite zeros"))
    }
}

/// `P(ν) = [νI − A, −B; C, 0]` evaluated at a real `ν`.
pub fn rosenbrock(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, nu: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    Blocks::new(&[n, p], &[n, m])
        .set(0, 0, &(DMatrix::identity(n, n) * nu - a))
        .set(0, 1, &(-b))
        .set(1, 0, c)
        .build()
}

/// Roots of `coeffs[0] + coeffs[1] t + ... + coeffs[d] t^d` as companion
/// matrix eigenvalues. Leading zero coefficients must already be trimmed.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    let mut comp = DMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    let mut roots: Vec<Complex64> = comp.complex_eigenvalues().iter().cloned().collect();
    // A couple of Newton steps on the polynomial itself tighten the roots.
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let (mut val, mut der) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &c in coeffs.iter().rev() {
                der = der * *z + val;
                val = val * *z + c;
            }
            if der.norm() == 0.0 {
                break;
            }
            let step = val / der;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *z -= step;
        }
    }
    roots
}

/// Finite zeros of the square pencil `νE − F`, found by interpolating
/// `det(νE − F)` (degree at most `degree_bound`) at Chebyshev-spaced points.
pub fn pencil_zeros(e: &DMatrix<f64>, f: &DMatrix<f64>, degree_bound: usize) -> Result<Vec<Complex64>> {
    assert!(e.is_square() && e.shape() == f.shape());
    let scale = 1.0 + f.norm() / e.norm().max(1e-300);
    let samples = degree_bound + 2;
    let nodes: Vec<f64> = (0..samples)
        .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * samples) as f64).cos())
        .collect();

    let mut dets = DVector::zeros(samples);
    let mut magnitude = 0.0f64;
    for (j, &t) in nodes.iter().enumerate() {
        let m = e * (scale * t) - f;
        dets[j] = m.clone().determinant();
        // Hadamard bound: |det| ≤ Π row norms.
        let bound: f64 = m.row_iter().map(|r| r.norm()).product();
        magnitude = magnitude.max(bound);
    }
    let det_max = dets.amax();
    if det_max <= 1e-12 * magnitude {
        return Err(Error::DegeneratePencil);
    }

    // Least squares fit in the scaled variable t = ν / scale.
    let vander = DMatrix::from_fn(samples, degree_bound + 1, |j, k| nodes[j].powi(k as i32));
    let coeffs = SVD::new(vander, true, true)
        .solve(&dets, 1e-14)
        .expect("SVD solve");
    let cmax = coeffs.amax();
    let mut deg = degree_bound;
    while deg > 0 && coeffs[deg].abs() <= KERNEL_TOL * cmax {
        deg -= 1;
    }
    let trimmed: Vec<f64> = coeffs.iter().take(deg + 1).cloned().collect();
    Ok(polynomial_roots(&trimmed)
        .into_iter()
        .map(|t| t * scale)
        .collect())
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-7 * z.norm().max(1.0)
}

/// Right singular vector of the smallest singular value of a matrix with at
/// least as many rows as columns, together with that singular value relative to
/// the largest.
fn smallest_right_vector(m: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("V requested");
    let (imin, smin) = svd.singular_values.argmin();
    let smax = svd.singular_values.max();
    (v_t.row(imin).transpose(), smin / smax.max(1e-300))
}

fn direction_from(v: DVector<f64>, n: usize) -> ZeroDirection {
    let mut v = v.normalize();
    canonical_sign(&mut v, 1e-10);
    let m = v.len() - n;
    ZeroDirection {
        x0: v.rows(0, n).into_owned(),
        g: v.rows(n, m).into_owned(),
    }
}

/// Transmission zeros of `(A, B, C)`: the values of `ν` where the Rosenbrock
/// matrix loses rank, with the zero direction for every real zero.
pub fn transmission_zeros(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<ZeroSet> {
    let n = a.nrows();
    let m = b.ncols();
    check_shapes(a, b, c)?;
    if c.nrows() != m {
        return Err(Error::NonSquare {
            inputs: m,
            outputs: c.nrows(),
        });
    }
    let rb = rank(b, KERNEL_TOL);
    if rb < m {
        return Err(Error::RankDeficient { rank: rb, cols: m });
    }
    let e = Blocks::new(&[n, m], &[n, m])
        .set(0, 0, &DMatrix::identity(n, n))
        .build();
    let f = rosenbrock(a, b, c, 0.0) * -1.0;
    let values = pencil_zeros(&e, &f, n)?;
    Ok(ZeroSet {
        zeros: values
            .into_iter()
            .map(|z| {
                let direction = is_real(z).then(|| {
                    let (v, _) = smallest_right_vector(&rosenbrock(a, b, c, z.re));
                    direction_from(v, n)
                });
                let value = if direction.is_some() { Complex64::new(z.re, 0.0) } else { z };
                TransmissionZero { value, direction }
            })
            .collect(),
    })
}

/// Zeros of a tall Rosenbrock-type pencil `[νI − A, −B; C, 0]` with more
/// output rows than inputs. The pencil is squared down with a fixed projection;
/// candidates are kept only where the original tall pencil actually drops rank.
pub fn tall_pencil_zeros(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<ZeroSet> {
    let n = a.nrows();
    let m = b.ncols();
    check_shapes(a, b, c)?;
    if c.nrows() == m {
        return transmission_zeros(a, b, c);
    }
    if c.nrows() < m {
        return Err(Error::NonSquare {
            inputs: m,
            outputs: c.nrows(),
        });
    }
    let rb = rank(b, KERNEL_TOL);
    if rb < m {
        return Err(Error::RankDeficient { rank: rb, cols: m });
    }
    // Deterministic projection of the output rows onto m combinations.
    let p = c.nrows();
    let w = DMatrix::from_fn(m, p, |i, j| (((i + 1) * 7919 + (j + 1) * 104729) as f64).sin());
    let c_sq = &w * c;
    let e = Blocks::new(&[n, m], &[n, m])
        .set(0, 0, &DMatrix::identity(n, n))
        .build();
    let f = rosenbrock(a, b, &c_sq, 0.0) * -1.0;
    let candidates = pencil_zeros(&e, &f, n)?;
    let mut zeros = Vec::new();
    for z in candidates.into_iter().filter(|z| is_real(*z)) {
        let tall = rosenbrock(a, b, c, z.re);
        let (v, rel) = smallest_right_vector(&tall);
        if rel <= 1e-8 {
            zeros.push(TransmissionZero {
                value: Complex64::new(z.re, 0.0),
                direction: Some(direction_from(v, n)),
            });
        }
    }
    Ok(ZeroSet { zeros })
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    Ok(())
}
