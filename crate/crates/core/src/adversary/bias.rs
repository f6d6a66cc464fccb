use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{canonical_sign, psd_pencil_max_geig, spectral_radius, Blocks};
use crate::system::{AttackLayout, LoopSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasNorm {
    Two,
    Inf,
}

/// Bias `a∞` on the reduced vector `[f; bᵘ; bʸ]`, reached through the
/// first-order filter `a_{j+1} = β a_j + (1 − β) a∞` started at step `k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPlan {
    pub a_infinity: Vec<f64>,
    pub beta: f64,
    pub k0: usize,
    #[serde(default)]
    pub lambda_star: Option<f64>,
    #[serde(default)]
    pub row: Option<usize>,
}

impl BiasPlan {
    /// Channel values at step `k`.
    ///
    /// Physical and actuator channels carry `(1 − β^j) a∞` with `j = k − k0`.
    /// The residual at step `k0+j+1` sees the sensor value of that same step,
    /// so sensor channels lag by one: `(1 − β^(j−1)) a∞`, zero at `j = 0`.
    /// With this alignment the loop residual equals the output of the
    /// autonomous filter system sample for sample.
    pub(super) fn reduced_at(&self, k: usize, lay: &AttackLayout) -> DVector<f64> {
        let c = DVector::from_column_slice(&self.a_infinity);
        let mut out = DVector::zeros(c.len());
        if k < self.k0 {
            return out;
        }
        let j = (k - self.k0) as i32;
        let w = 1.0 - self.beta.powi(j);
        let split = lay.physical + lay.actuator;
        for i in 0..split {
            out[i] = w * c[i];
        }
        if j >= 1 {
            let ws = 1.0 - self.beta.powi(j - 1);
            for i in split..c.len() {
                out[i] = ws * c[i];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSolution {
    pub a_infinity: DVector<f64>,
    pub lambda_star: f64,
    /// Maximizing state index of the ∞-norm problem (0-based).
    pub row: Option<usize>,
}

fn check_gains(g_xa: &DMatrix<f64>, g_ra: &DMatrix<f64>, delta_alpha: f64) -> Result<()> {
    if g_xa.ncols() != g_ra.ncols() || g_xa.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "G_xa {:?} and G_ra {:?} must share a nonzero column count",
            g_xa.shape(),
            g_ra.shape()
        )));
    }
    if !(delta_alpha > 0.0) {
        return Err(Error::InvalidParameter("δα must be positive".into()));
    }
    Ok(())
}

fn scale_to_constraint(v: &DVector<f64>, g_ra: &DMatrix<f64>, delta_alpha: f64) -> DVector<f64> {
    v * (delta_alpha / (g_ra * v).norm())
}

/// Maximizes `‖G_xa a‖₂` subject to `‖G_ra a‖₂ ≤ δα`.
pub fn synth_bias_2norm(g_xa: &DMatrix<f64>, g_ra: &DMatrix<f64>, delta_alpha: f64) -> Result<BiasSolution> {
    check_gains(g_xa, g_ra, delta_alpha)?;
    let res = psd_pencil_max_geig(&(g_xa.transpose() * g_xa), &(g_ra.transpose() * g_ra))?;
    let mut a = scale_to_constraint(&res.v_star, g_ra, delta_alpha);
    orient(&mut a, g_xa, None);
    Ok(BiasSolution {
        a_infinity: a,
        lambda_star: res.lambda_star,
        row: None,
    })
}

/// Maximizes `‖G_xa a‖∞` subject to `‖G_ra a‖₂ ≤ δα`, one pencil per row.
pub fn synth_bias_infnorm(g_xa: &DMatrix<f64>, g_ra: &DMatrix<f64>, delta_alpha: f64) -> Result<BiasSolution> {
    check_gains(g_xa, g_ra, delta_alpha)?;
    let q = g_ra.transpose() * g_ra;
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    for i in 0..g_xa.nrows() {
        let row = g_xa.row(i).transpose();
        let p = &row * row.transpose();
        let res = psd_pencil_max_geig(&p, &q)?;
        if best.as_ref().is_none_or(|(_, l, _)| res.lambda_star > *l) {
            best = Some((i, res.lambda_star, res.v_star));
        }
    }
    let (i, lambda_star, v) = best.ok_or_else(|| Error::DimensionMismatch("G_xa has no rows".into()))?;
    let mut a = scale_to_constraint(&v, g_ra, delta_alpha);
    orient(&mut a, g_xa, Some(i));
    Ok(BiasSolution {
        a_infinity: a,
        lambda_star,
        row: Some(i),
    })
}

/// Fixes the ± ambiguity: the first nonzero entry of `G_xa a` (or entry
/// `row`) is made positive; if the impact vanishes, the first entry of `a`.
fn orient(a: &mut DVector<f64>, g_xa: &DMatrix<f64>, row: Option<usize>) {
    let x = g_xa * &*a;
    let eps = 1e-12 * x.amax().max(f64::MIN_POSITIVE);
    let pivot = match row {
        Some(i) => Some(x[i]),
        None => x.iter().find(|v| v.abs() > eps).copied(),
    };
    match pivot {
        Some(p) if p.abs() > eps => {
            if p < 0.0 {
                a.neg_mut();
            }
        }
        _ => canonical_sign(a, 1e-15),
    }
}

/// `a_k = (1 − β^k) a∞`
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTransient {
    pub a_infinity: DVector<f64>,
    pub beta: f64,
}

impl BiasTransient {
    pub fn at(&self, k: usize) -> DVector<f64> {
        &self.a_infinity * (1.0 - self.beta.powi(k as i32))
    }
}

pub fn bias_transient(a_infinity: &DVector<f64>, beta: f64) -> Result<BiasTransient> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("β = {beta} outside (0, 1)")));
    }
    Ok(BiasTransient {
        a_infinity: a_infinity.clone(),
        beta,
    })
}

/// `ψ_{j+1} = Ā ψ_j`, `r^a = C̄ ψ_j` with `ψ = [ξ; a_j; a∞]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasAutonomous {
    pub abar: DMatrix<f64>,
    pub cbar: DMatrix<f64>,
    pub psi0: DVector<f64>,
    pub beta: f64,
    /// Spectral radius of the detector-error dynamics.
    pub error_radius: f64,
}

impl BiasAutonomous {
    /// Outputs `C̄ψ_j` for `j = 0..steps`.
    pub fn outputs(&self, steps: usize) -> Vec<DVector<f64>> {
        let mut psi = self.psi0.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            out.push(&self.cbar * &psi);
            psi = &self.abar * psi;
        }
        out
    }
}

pub fn build_bias_autonomous(lp: &LoopSystem, a_infinity: &DVector<f64>, beta: f64) -> Result<BiasAutonomous> {
    let e = lp.layout.expansion();
    let r = e.ncols();
    if a_infinity.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "a∞ has {} entries, the attack layout reduces to {r}",
            a_infinity.len()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("β = {beta} outside [0, 1]")));
    }
    let er = &lp.error;
    let ne = er.a.nrows();
    let pd = er.c.nrows();
    let eye = DMatrix::<f64>::identity(r, r);
    let abar = Blocks::new(&[ne, r, r], &[ne, r, r])
        .set(0, 0, &er.a)
        .set(0, 1, &(&er.b * &e))
        .set(1, 1, &(&eye * beta))
        .set(1, 2, &(&eye * (1.0 - beta)))
        .set(2, 2, &eye)
        .build();
    let cbar = Blocks::new(&[pd], &[ne, r, r])
        .set(0, 0, &er.c)
        .set(0, 1, &(&er.d * &e))
        .build();
    let mut psi0 = DVector::zeros(ne + 2 * r);
    psi0.rows_mut(ne + r, r).copy_from(a_infinity);
    Ok(BiasAutonomous {
        abar,
        cbar,
        psi0,
        beta,
        error_radius: spectral_radius(&er.a),
    })
}

/// `⌈20 / (1 − max(β, ρ))⌉`, capped for (near) marginal cases.
pub fn default_horizon(beta: f64, error_radius: f64) -> usize {
    const CAP: usize = 1_000_000;
    let slow = beta.max(error_radius);
    if slow >= 1.0 {
        return CAP;
    }
    ((20.0 / (1.0 - slow)).ceil() as usize).clamp(1, CAP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealthCertificate {
    pub max_residual: f64,
    pub argmax: usize,
    pub pass: bool,
    pub horizon: usize,
    pub delta_alpha: f64,
    pub norms: Vec<f64>,
}

/// Exact finite-horizon check of `‖r^a_j‖₂ ≤ δα (1 + tol)`.
pub fn verify_alpha_stealthy(
    sys: &BiasAutonomous,
    delta_alpha: f64,
    horizon: Option<usize>,
    tol: f64,
) -> StealthCertificate {
    let horizon = horizon
        .unwrap_or_else(|| default_horizon(sys.beta, sys.error_radius))
        .max(1);
    let norms: Vec<f64> = sys.outputs(horizon).iter().map(|r| r.norm()).collect();
    let (argmax, max_residual) = norms
        .iter()
        .cloned()
        .enumerate()
        .fold((0, 0.0), |best, (j, v)| if v > best.1 { (j, v) } else { best });
    StealthCertificate {
        max_residual,
        argmax,
        pass: max_residual <= delta_alpha * (1.0 + tol),
        horizon,
        delta_alpha,
        norms,
    }
}
