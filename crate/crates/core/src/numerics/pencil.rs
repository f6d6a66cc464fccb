use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{canonical_sign, KERNEL_TOL};
use crate::error::{Error, Result};

/// Largest generalized eigenpair of a symmetric positive semi-definite pencil.
#[derive(Debug, Clone)]
pub struct PencilResult {
    pub lambda_star: f64,
    /// Unit-norm eigenvector for `lambda_star`, never in `ker(Q)`.
    pub v_star: DVector<f64>,
    /// Finite generalized eigenvalues in descending order.
    pub all_eigs: Vec<f64>,
    /// Generalized eigenvectors matching `all_eigs`, each unit-norm.
    pub eigvecs: Vec<DVector<f64>>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_psd(which: &'static str, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> Result<f64> {
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -KERNEL_TOL * max_abs.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { which, min_eig: min });
    }
    Ok(max_abs)
}

/// Solves `max x'Px / x'Qx` over `Qx != 0` for PSD `P`, `Q` with
/// `ker(Q) ⊆ ker(P)`.
///
/// The kernel of `Q` is split off with an orthogonal change of basis
/// `T = [V_range V_ker]`. On the range part `Q̃ ≻ 0`, and the pencil
/// `(P̃, Q̃)` becomes the ordinary symmetric eigenproblem of `M P̃ M` with
/// `M = Q̃^{-1/2}`. Eigenvectors are mapped back through `M` and `V_range`.
pub fn psd_pencil_max_geig(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<PencilResult> {
    if !p.is_square() || p.shape() != q.shape() {
        return Err(Error::DimensionMismatch(format!(
            "pencil matrices must be square and equal-sized, got {:?} and {:?}",
            p.shape(),
            q.shape()
        )));
    }
    let n = p.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty pencil".into()));
    }
    let p = symmetrize(p);
    let q = symmetrize(q);

    let p_eig = SymmetricEigen::new(p.clone());
    let p_scale = check_psd("P", &p_eig)?;
    let q_eig = SymmetricEigen::new(q.clone());
    let q_scale = check_psd("Q", &q_eig)?;
    if q_scale == 0.0 {
        return Err(Error::KernelViolation {
            residual: p_scale,
        });
    }

    let range: Vec<usize> = (0..n)
        .filter(|&i| q_eig.eigenvalues[i] > KERNEL_TOL * q_scale)
        .collect();
    let kernel: Vec<usize> = (0..n).filter(|i| !range.contains(i)).collect();

    // ker(Q) ⊆ ker(P), checked column by column on the kernel basis.
    let worst = kernel
        .iter()
        .map(|&i| (&p * q_eig.eigenvectors.column(i)).norm())
        .fold(0.0, f64::max);
    if worst > 1e-7 * p_scale {
        return Err(Error::KernelViolation { residual: worst });
    }

    let r = range.len();
    let mut v_range = DMatrix::zeros(n, r);
    let mut m_diag = DVector::zeros(r);
    for (j, &i) in range.iter().enumerate() {
        v_range.set_column(j, &q_eig.eigenvectors.column(i));
        m_diag[j] = 1.0 / q_eig.eigenvalues[i].sqrt();
    }
    // Q̃ = V_rangeᵀ Q V_range is diagonal here, so M is diagonal too.
    let p_tilde = v_range.transpose() * &p * &v_range;
    let m = DMatrix::from_diagonal(&m_diag);
    let reduced = symmetrize(&(&m * p_tilde * &m));
    let red_eig = SymmetricEigen::new(reduced);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        red_eig.eigenvalues[b]
            .partial_cmp(&red_eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut all_eigs = Vec::with_capacity(r);
    let mut eigvecs = Vec::with_capacity(r);
    for &i in &order {
        let w = red_eig.eigenvectors.column(i);
        let mut v = &v_range * (&m * w);
        let norm = v.norm();
        v /= norm;
        canonical_sign(&mut v, 1e-12);
        all_eigs.push(red_eig.eigenvalues[i].max(0.0));
        eigvecs.push(v);
    }

    Ok(PencilResult {
        lambda_star: all_eigs[0],
        v_star: eigvecs[0].clone(),
        all_eigs,
        eigvecs,
    })
}
