//! Quadruple-tank process: four coupled tanks, two pumps, two level sensors
//! on the lower tanks. Levels in cm, pump voltages in V, time in s.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::discretize::{discretize, Discretization};
use super::{PlantDynamics, StepOutcome};
use crate::error::{Error, Result};
use crate::system::PlantModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtpParams {
    /// Tank cross sections `A_i` (cm²).
    pub area: [f64; 4],
    /// Outlet cross sections `a_i` (cm²).
    pub outlet: [f64; 4],
    /// Pump gains `k_1, k_2` (cm³/(V·s)).
    pub pump_gain: [f64; 2],
    /// Valve split ratios `γ_1, γ_2`.
    pub gamma: [f64; 2],
    pub gravity: f64,
    pub level_max: f64,
    pub input_max: f64,
    /// RK4 substeps per sample.
    pub substeps: usize,
}

impl QtpParams {
    /// `γ_1 + γ_2 > 1`: both zeros stable.
    pub fn minimum_phase() -> Self {
        Self {
            area: [28.0, 32.0, 28.0, 32.0],
            outlet: [0.071, 0.057, 0.071, 0.057],
            pump_gain: [3.33, 3.35],
            gamma: [0.70, 0.60],
            gravity: 981.0,
            level_max: 30.0,
            input_max: 10.0,
            substeps: 10,
        }
    }

    /// `γ_1 + γ_2 < 1`: one unstable zero.
    #[allow(clippy::approx_constant)]
    pub fn non_minimum_phase() -> Self {
        Self {
            pump_gain: [3.14, 3.29],
            gamma: [0.43, 0.34],
            ..Self::minimum_phase()
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = self.area.iter().chain(&self.outlet).chain(&self.pump_gain).all(|x| *x > 0.0)
            && self.gravity > 0.0
            && self.level_max > 0.0
            && self.input_max > 0.0;
        if !positive || self.substeps == 0 || self.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidParameter("quadruple-tank parameters out of range".into()));
        }
        Ok(())
    }
}

impl Default for QtpParams {
    fn default() -> Self {
        Self::minimum_phase()
    }
}

/// Level derivatives. Negative levels are treated as empty tanks.
pub fn qtp_rhs(h: &[f64; 4], u: &[f64; 2], p: &QtpParams) -> [f64; 4] {
    let out = |i: usize| p.outlet[i] * (2.0 * p.gravity * h[i].max(0.0)).sqrt();
    let [k1, k2] = p.pump_gain;
    let [g1, g2] = p.gamma;
    [
        (-out(0) + out(2) + g1 * k1 * u[0]) / p.area[0],
        (-out(1) + out(3) + g2 * k2 * u[1]) / p.area[1],
        (-out(2) + (1.0 - g2) * k2 * u[1]) / p.area[2],
        (-out(3) + (1.0 - g1) * k1 * u[0]) / p.area[3],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtpStep {
    /// Levels clipped to `[0, level_max]`.
    pub levels: [f64; 4],
    pub unclipped: [f64; 4],
    pub clipped: bool,
}

/// Integrates one sample of length `dt` with RK4 substeps, inputs held.
pub fn qtp_step(h: &[f64; 4], u: &[f64; 2], dt: f64, p: &QtpParams) -> QtpStep {
    let n = p.substeps.max(1);
    let step = dt / n as f64;
    let axpy = |x: &[f64; 4], k: &[f64; 4], s: f64| std::array::from_fn::<f64, 4, _>(|i| x[i] + s * k[i]);
    let mut x = *h;
    for _ in 0..n {
        let k1 = qtp_rhs(&x, u, p);
        let k2 = qtp_rhs(&axpy(&x, &k1, step / 2.0), u, p);
        let k3 = qtp_rhs(&axpy(&x, &k2, step / 2.0), u, p);
        let k4 = qtp_rhs(&axpy(&x, &k3, step), u, p);
        x = std::array::from_fn(|i| x[i] + step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    clip_levels(x, p)
}

fn clip_levels(x: [f64; 4], p: &QtpParams) -> QtpStep {
    let levels = x.map(|v| v.clamp(0.0, p.level_max));
    QtpStep {
        clipped: levels != x,
        levels,
        unclipped: x,
    }
}

/// Steady levels for constant pump voltages `u*`.
pub fn qtp_equilibrium(p: &QtpParams, u: &[f64; 2]) -> Result<[f64; 4]> {
    p.validate()?;
    let s = (2.0 * p.gravity).sqrt();
    let [k1, k2] = p.pump_gain;
    let [g1, g2] = p.gamma;
    let q3 = (1.0 - g2) * k2 * u[1];
    let q4 = (1.0 - g1) * k1 * u[0];
    let q1 = q3 + g1 * k1 * u[0];
    let q2 = q4 + g2 * k2 * u[1];
    let lvl = |q: f64, i: usize| (q / (p.outlet[i] * s)).powi(2);
    let h = [lvl(q1, 0), lvl(q2, 1), lvl(q3, 2), lvl(q4, 3)];
    if h.iter().any(|&x| !(x > 0.0 && x < p.level_max)) {
        return Err(Error::BoundaryOperatingPoint);
    }
    Ok(h)
}

/// Continuous-time Jacobians `(∂f/∂h, ∂f/∂u)` at levels `h`.
pub fn qtp_jacobian(p: &QtpParams, h: &[f64; 4]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if h.iter().any(|&x| !(x > 0.0 && x < p.level_max)) {
        return Err(Error::BoundaryOperatingPoint);
    }
    // d/dh of a√(2gh) is a√(g/(2h))
    let d = |i: usize| p.outlet[i] * (p.gravity / (2.0 * h[i])).sqrt();
    let ar = p.area;
    let mut a = DMatrix::zeros(4, 4);
    for i in 0..4 {
        a[(i, i)] = -d(i) / ar[i];
    }
    a[(0, 2)] = d(2) / ar[0];
    a[(1, 3)] = d(3) / ar[1];
    let [k1, k2] = p.pump_gain;
    let [g1, g2] = p.gamma;
    let mut b = DMatrix::zeros(4, 2);
    b[(0, 0)] = g1 * k1 / ar[0];
    b[(1, 1)] = g2 * k2 / ar[1];
    b[(2, 1)] = (1.0 - g2) * k2 / ar[2];
    b[(3, 0)] = (1.0 - g1) * k1 / ar[3];
    Ok((a, b))
}

/// Sampled linearization about `(h*, u*)`: measured `h_1, h_2`, process noise
/// and physical attacks enter every level directly.
pub fn qtp_linearize(p: &QtpParams, h: &[f64; 4], ts: f64) -> Result<PlantModel> {
    let (ac, bc) = qtp_jacobian(p, h)?;
    let (a, b) = discretize(&ac, &bc, ts, Discretization::Zoh)?;
    let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let mut model = PlantModel::new(a, b, c)?.with_fault(DMatrix::identity(4, 4))?;
    model.sample_time = ts;
    Ok(model)
}

/// Nonlinear plant in deviation coordinates around `(h*, u*)`.
#[derive(Debug, Clone)]
pub struct QtpPlant {
    pub params: QtpParams,
    pub h_star: [f64; 4],
    pub u_star: [f64; 2],
    pub model: PlantModel,
}

impl QtpPlant {
    pub fn new(params: QtpParams, u_star: [f64; 2], ts: f64) -> Result<Self> {
        let h_star = qtp_equilibrium(&params, &u_star)?;
        if u_star.iter().any(|&u| !(u > 0.0 && u < params.input_max)) {
            return Err(Error::BoundaryOperatingPoint);
        }
        let model = qtp_linearize(&params, &h_star, ts)?;
        Ok(Self {
            params,
            h_star,
            u_star,
            model,
        })
    }

    pub fn levels(&self, x: &DVector<f64>) -> [f64; 4] {
        std::array::from_fn(|i| self.h_star[i] + x[i])
    }
}

impl PlantDynamics for QtpPlant {
    fn model(&self) -> &PlantModel {
        &self.model
    }

    fn physical(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_column_slice(&self.levels(x))
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, f: &DVector<f64>) -> StepOutcome {
        let p = &self.params;
        let raw: [f64; 2] = std::array::from_fn(|i| self.u_star[i] + u[i]);
        let applied = raw.map(|v| v.clamp(0.0, p.input_max));
        let flow = qtp_step(&self.levels(x), &applied, self.model.sample_time, p);
        let disturbed = &self.model.g * w + &self.model.f * f;
        let unclipped: [f64; 4] = std::array::from_fn(|i| flow.unclipped[i] + disturbed[i]);
        let out = clip_levels(unclipped, p);
        StepOutcome {
            next: DVector::from_iterator(4, (0..4).map(|i| out.levels[i] - self.h_star[i])),
            unclipped: DVector::from_column_slice(&out.unclipped),
            saturated: applied != raw || out.clipped,
        }
    }
}
