//! Dense linear-algebra kernels used by the synthesis routines.
//!
//! Everything here is a pure function over `nalgebra` dynamic matrices.

mod pencil;
mod riccati;
mod zeros;

pub use pencil::{psd_pencil_max_geig, PencilResult};
pub use riccati::{riccati_step, solve_dare, DARE_MAX_ITER, DARE_TOL};
pub use zeros::{
    pencil_zeros, polynomial_roots, rosenbrock, tall_pencil_zeros, transmission_zeros, TransmissionZero,
    ZeroChoice, ZeroDirection, ZeroSet,
};

use nalgebra::{DMatrix, DVector, SVD};

/// Relative singular-value threshold that defines a numerical kernel.
pub const KERNEL_TOL: f64 = 1e-9;

/// Orthonormal basis of the numerical null space of `m`.
///
/// A right singular vector belongs to the kernel when its singular value is at
/// most `tol * sigma_max`. Wide matrices are padded with zero rows so the SVD
/// returns a full set of right singular vectors.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("V requested");
    let sigma = &svd.singular_values;
    let smax = sigma.max();
    // The thin SVD of a tall matrix yields exactly `cols` singular values.
    let keep: Vec<usize> = (0..sigma.len())
        .filter(|&i| smax == 0.0 || sigma[i] <= tol * smax)
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Numerical rank with the same relative threshold as [`null_space`].
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let sigma = m.clone().singular_values();
    let smax = sigma.max();
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Assembles a block matrix from row heights, column widths and the nonzero
/// blocks placed at `(block_row, block_col)`. Unset blocks are zero.
#[derive(Debug, Clone)]
pub(crate) struct Blocks {
    rows: Vec<usize>,
    cols: Vec<usize>,
    out: DMatrix<f64>,
}

impl Blocks {
    pub(crate) fn new(rows: &[usize], cols: &[usize]) -> Self {
        let out = DMatrix::zeros(rows.iter().sum(), cols.iter().sum());
        Self {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            out,
        }
    }

    pub(crate) fn set(mut self, i: usize, j: usize, block: &DMatrix<f64>) -> Self {
        assert_eq!(
            block.shape(),
            (self.rows[i], self.cols[j]),
            "block ({i},{j}) has the wrong shape"
        );
        let r0: usize = self.rows[..i].iter().sum();
        let c0: usize = self.cols[..j].iter().sum();
        if block.nrows() > 0 && block.ncols() > 0 {
            self.out
                .view_mut((r0, c0), block.shape())
                .copy_from(block);
        }
        self
    }

    pub(crate) fn build(self) -> DMatrix<f64> {
        self.out
    }
}

pub(crate) fn vstack(parts: &[&DVector<f64>]) -> DVector<f64> {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

/// Flips `v` so that its first entry with magnitude above `eps` is positive.
pub(crate) fn canonical_sign(v: &mut DVector<f64>, eps: f64) {
    if let Some(first) = v.iter().find(|x| x.abs() > eps) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_space_of_identity_is_empty() {
        let basis = null_space(&DMatrix::identity(3, 3), KERNEL_TOL);
        assert_eq!(basis.ncols(), 0);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let basis = null_space(&DMatrix::zeros(2, 2), KERNEL_TOL);
        assert_eq!(basis.ncols(), 2);
        assert_relative_eq!(basis.transpose() * &basis, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn null_space_rank_one() {
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        let mut basis = null_space(&m, KERNEL_TOL);
        assert_eq!(basis.ncols(), 1);
        let mut v = basis.column(0).into_owned();
        canonical_sign(&mut v, 1e-12);
        basis.set_column(0, &v);
        let s = 1.0 / 2f64.sqrt();
        assert_relative_eq!(v[0], s, epsilon = 1e-12);
        assert_relative_eq!(v[1], -s, epsilon = 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = dmatrix![1.0, 2.0, 3.0];
        let basis = null_space(&m, KERNEL_TOL);
        assert_eq!(basis.ncols(), 2);
        assert!((&m * &basis).norm() <= 1e-12);
        assert_relative_eq!(basis.transpose() * &basis, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn null_space_contract_on_random_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.random_range(1..4);
            let x = DMatrix::from_fn(5, r, |_, _| rng.random_range(-1.0..1.0));
            let y = DMatrix::from_fn(r, 6, |_, _| rng.random_range(-1.0..1.0));
            let m = x * y;
            let basis = null_space(&m, KERNEL_TOL);
            assert_eq!(basis.ncols(), 6 - r);
            assert!((&m * &basis).norm() <= KERNEL_TOL * m.norm());
        }
    }

    #[test]
    fn spectral_radius_basic() {
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)), 0.0);
        let d = dmatrix![0.5, 0.0; 0.0, -0.9];
        assert_relative_eq!(spectral_radius(&d), 0.9, epsilon = 1e-14);
        // rotation-scaled: complex pair of modulus 0.8
        let c = dmatrix![0.0, -0.8; 0.8, 0.0];
        assert_relative_eq!(spectral_radius(&c), 0.8, epsilon = 1e-14);
    }

    fn power_iteration(m: &DMatrix<f64>) -> f64 {
        let mut v = DVector::from_element(m.nrows(), 1.0);
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let w = m * &v;
            lambda = w.norm() / v.norm();
            v = w / lambda;
        }
        lambda
    }

    #[test]
    fn spectral_radius_matches_power_iteration() {
        // Entrywise-positive matrices have a simple dominant real eigenvalue,
        // so plain power iteration converges geometrically.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = DMatrix::from_fn(5, 5, |_, _| rng.random_range(0.05..1.0));
            let oracle = power_iteration(&m);
            assert!((spectral_radius(&m) - oracle).abs() <= 1e-8 * oracle.max(1.0));
        }
    }

    #[test]
    fn blocks_assemble_with_empty_blocks() {
        let a = dmatrix![1.0, 2.0];
        let m = Blocks::new(&[1, 2], &[2, 0])
            .set(0, 0, &a)
            .set(1, 1, &DMatrix::zeros(2, 0))
            .build();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(2, 0)], 0.0);
    }
}
