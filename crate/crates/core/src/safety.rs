//! Safe sets, the alarm rule, stealthiness classification and impact metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::DetectorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SafeSet {
    /// `‖x‖₂ ≤ radius`
    Ball2 { radius: f64 },
    /// `‖x − center‖∞ ≤ radius`
    BoxInf { center: Vec<f64>, radius: f64 },
    /// `xᵀPx ≤ 1`, `P` given row-major.
    Ellipsoid { p: Vec<Vec<f64>> },
}

impl SafeSet {
    pub fn unit_ball() -> Self {
        SafeSet::Ball2 { radius: 1.0 }
    }

    pub fn box_around(center: &DVector<f64>, radius: f64) -> Self {
        SafeSet::BoxInf {
            center: center.iter().cloned().collect(),
            radius,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            SafeSet::Ball2 { radius } | SafeSet::BoxInf { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidParameter("safe-set radius must be positive".into()))
            }
            SafeSet::BoxInf { center, .. } if center.len() != n => Err(Error::DimensionMismatch(format!(
                "box center has {} entries for {n} states",
                center.len()
            ))),
            SafeSet::Ellipsoid { p } => {
                let m = rows_to_matrix(p)?;
                if m.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!("ellipsoid {:?} for {n} states", m.shape())));
                }
                if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::InvalidParameter("ellipsoid matrix must be symmetric".into()));
                }
                let min = m.symmetric_eigen().eigenvalues.min();
                if min <= 0.0 {
                    return Err(Error::NotPsd { which: "ellipsoid", min_eig: min });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            SafeSet::Ball2 { radius } => x.norm() <= *radius,
            SafeSet::BoxInf { center, radius } => x
                .iter()
                .zip(center)
                .all(|(xi, ci)| (xi - ci).abs() <= *radius),
            SafeSet::Ellipsoid { p } => match rows_to_matrix(p) {
                Ok(m) => x.dot(&(m * x)) <= 1.0,
                Err(_) => false,
            },
        }
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn is_safe(x: &DVector<f64>, set: &SafeSet) -> bool {
    set.contains(x)
}

/// `‖r‖₂ ≥ δr + δα`
pub fn alarm(r: &DVector<f64>, delta_r: f64, delta_alpha: f64) -> bool {
    r.norm() >= delta_r + delta_alpha
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealthReport {
    pub max_residual: f64,
    pub first_alarm: Option<usize>,
    /// Every `‖r_k‖ < δr + δα` over the window.
    pub stealthy: bool,
    /// Every `‖r^a_k‖ < δα` over the window (when a response trace is given).
    pub alpha_stealthy: Option<bool>,
    pub max_response_residual: Option<f64>,
}

/// Classifies steps `window.0..window.1` of a residual trace. `response`, when
/// given, is the attack-only residual `r^a_k` over the same steps.
pub fn classify_trace(
    residuals: &[DVector<f64>],
    response: Option<&[DVector<f64>]>,
    detector: &DetectorModel,
    window: (usize, usize),
) -> StealthReport {
    let (start, stop) = (window.0.min(residuals.len()), window.1.min(residuals.len()));
    let mut max_residual = 0.0f64;
    let mut first_alarm = None;
    for (k, r) in residuals.iter().enumerate().take(stop).skip(start) {
        max_residual = max_residual.max(r.norm());
        if first_alarm.is_none() && alarm(r, detector.delta_r, detector.delta_alpha) {
            first_alarm = Some(k);
        }
    }
    let max_response_residual = response.map(|ra| {
        ra.iter()
            .take(stop)
            .skip(start)
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    });
    StealthReport {
        max_residual,
        first_alarm,
        stealthy: first_alarm.is_none(),
        alpha_stealthy: max_response_residual.map(|m| m < detector.delta_alpha),
        max_response_residual,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Impact {
    pub x_inf: DVector<f64>,
    pub safe: bool,
}

/// Steady-state state deviation `G_xa a∞` and its membership in `set`.
pub fn steady_state_impact(g_xa: &DMatrix<f64>, a_inf: &DVector<f64>, set: &SafeSet) -> Impact {
    let x_inf = g_xa * a_inf;
    let safe = set.contains(&x_inf);
    Impact { x_inf, safe }
}

/// Largest relative distance of the trajectory from `span(x0)`.
pub fn span_distance(trajectory: &[DVector<f64>], x0: &DVector<f64>) -> Result<f64> {
    let nx = x0.norm();
    if nx == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let u = x0 / nx;
    Ok(trajectory
        .iter()
        .map(|x| {
            let resid = x - &u * u.dot(x);
            resid.norm() / x.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max))
}
