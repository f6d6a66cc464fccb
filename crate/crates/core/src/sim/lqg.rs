use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve_dare, spectral_radius, Blocks};
use crate::system::{ControllerModel, DetectorModel, PlantModel};

/// Diagonal LQG weights. A single entry is broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqgSpec {
    pub q_state: Vec<f64>,
    pub r_input: Vec<f64>,
    /// Weights on the output integrators; `None` designs without integral action.
    #[serde(default)]
    pub q_integral: Option<Vec<f64>>,
    pub process_cov: Vec<f64>,
    pub measurement_cov: Vec<f64>,
    /// Added to the process covariance to keep the filter Riccati well posed.
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-9
}

fn diag(list: &[f64], n: usize, what: &str) -> Result<DMatrix<f64>> {
    let d = match list.len() {
        1 => DVector::from_element(n, list[0]),
        len if len == n => DVector::from_column_slice(list),
        len => return Err(Error::DimensionMismatch(format!("{what} has {len} weights for {n} entries"))),
    };
    if d.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} weights must be finite and nonnegative")));
    }
    Ok(DMatrix::from_diagonal(&d))
}

/// Filtered-estimate LQG controller and the matching Kalman detector (`V = I`).
///
/// Controller state is `[x̂_{k|k−1}; i_k]` with `i_{k+1} = i_k + ỹ_k`, and
/// `u_k = −L_x x̂_{k|k} − L_i i_k`.
pub fn design_lqg(
    plant: &PlantModel,
    spec: &LqgSpec,
    delta_r: f64,
    delta_alpha: f64,
) -> Result<(ControllerModel, DetectorModel)> {
    let (n, q, p) = (plant.states(), plant.inputs(), plant.outputs());
    let (a, b, c) = (&plant.a, &plant.b, &plant.c);

    let w = &plant.g * diag(&spec.process_cov, plant.g.ncols(), "process covariance")? * plant.g.transpose()
        + DMatrix::identity(n, n) * spec.floor;
    let v = diag(&spec.measurement_cov, p, "measurement covariance")?;
    let pf = solve_dare(&a.transpose(), &c.transpose(), &w, &v)?;
    let s = c * &pf * c.transpose() + &v;
    let k = s
        .lu()
        .solve(&(c * &pf))
        .ok_or_else(|| Error::InvalidParameter("innovation covariance is singular".into()))?
        .transpose();

    let qx = diag(&spec.q_state, n, "state")?;
    let r = diag(&spec.r_input, q, "input")?;
    let ikc = DMatrix::identity(n, n) - &k * c;

    let ctrl = match &spec.q_integral {
        None => {
            let pc = solve_dare(a, b, &qx, &r)?;
            let l = gain(&pc, a, b, &r)?;
            let abl = a - b * &l;
            ControllerModel::new(&abl * &ikc, &abl * &k, -(&l * &ikc), -(&l * &k))
        }
        Some(qi) => {
            let qi = diag(qi, p, "integral")?;
            let aa = Blocks::new(&[n, p], &[n, p])
                .set(0, 0, a)
                .set(1, 0, c)
                .set(1, 1, &DMatrix::identity(p, p))
                .build();
            let ba = Blocks::new(&[n, p], &[q]).set(0, 0, b).build();
            let qa = Blocks::new(&[n, p], &[n, p]).set(0, 0, &qx).set(1, 1, &qi).build();
            let pc = solve_dare(&aa, &ba, &qa, &r)?;
            let l = gain(&pc, &aa, &ba, &r)?;
            let lx = l.columns(0, n).into_owned();
            let li = l.columns(n, p).into_owned();
            let abl = a - b * &lx;
            let ac = Blocks::new(&[n, p], &[n, p])
                .set(0, 0, &(&abl * &ikc))
                .set(0, 1, &(-(b * &li)))
                .set(1, 1, &DMatrix::identity(p, p))
                .build();
            let bc = Blocks::new(&[n, p], &[p])
                .set(0, 0, &(&abl * &k))
                .set(1, 0, &DMatrix::identity(p, p))
                .build();
            let cc = Blocks::new(&[q], &[n, p]).set(0, 0, &(-(&lx * &ikc))).set(0, 1, &(-li)).build();
            ControllerModel::new(ac, bc, cc, -(&lx * &k))
        }
    };
    let det = DetectorModel::new(k, delta_r, delta_alpha);
    det.check(plant)?;

    let lp_a = closed_loop_matrix(plant, &ctrl);
    let radius = spectral_radius(&lp_a);
    if radius >= 1.0 {
        return Err(Error::UnstableSystem { what: "LQG closed loop", radius });
    }
    Ok((ctrl, det))
}

fn gain(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    (r + b.transpose() * p * b)
        .lu()
        .solve(&(b.transpose() * p * a))
        .ok_or_else(|| Error::InvalidParameter("R + BᵀPB is singular".into()))
}

fn closed_loop_matrix(plant: &PlantModel, ctrl: &ControllerModel) -> DMatrix<f64> {
    let (a, b, c) = (&plant.a, &plant.b, &plant.c);
    Blocks::new(&[plant.states(), ctrl.states()], &[plant.states(), ctrl.states()])
        .set(0, 0, &(a + b * &ctrl.dc * c))
        .set(0, 1, &(b * &ctrl.cc))
        .set(1, 0, &(&ctrl.bc * c))
        .set(1, 1, &ctrl.ac)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn spec(integral: bool) -> LqgSpec {
        LqgSpec {
            q_state: vec![1.0],
            r_input: vec![1.0],
            q_integral: integral.then(|| vec![0.1]),
            process_cov: vec![1.0],
            measurement_cov: vec![1.0],
            floor: 0.0,
        }
    }

    #[test]
    fn scalar_gains() {
        let plant = PlantModel::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let (ctrl, det) = design_lqg(&plant, &spec(false), 0.15, 0.25).unwrap();
        // P solves P = 0.25P − 0.25P²/(1+P) + 1
        let p = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        let l = 0.5 * p / (1.0 + p);
        // filter: same Riccati, K = P/(P+1)
        let k = p / (p + 1.0);
        assert_relative_eq!(det.k[(0, 0)], k, epsilon = 1e-9);
        assert_relative_eq!(ctrl.dc[(0, 0)], -l * k, epsilon = 1e-9);
        assert_relative_eq!(ctrl.ac[(0, 0)], (0.5 - l) * (1.0 - k), epsilon = 1e-9);
    }

    #[test]
    fn integral_action_rejects_constant_disturbance() {
        let plant = PlantModel::new(dmatrix![0.9, 0.1; 0.0, 0.8], dmatrix![0.0; 1.0], dmatrix![1.0, 0.0]).unwrap();
        let (ctrl, _) = design_lqg(&plant, &spec(true), 0.15, 0.25).unwrap();
        assert_eq!(ctrl.states(), 3);
        // constant input disturbance d: steady output must be zero
        let cl = closed_loop_matrix(&plant, &ctrl);
        let mut bd = DMatrix::zeros(5, 1);
        bd[(1, 0)] = 1.0;
        let x = (DMatrix::identity(5, 5) - cl).lu().solve(&bd).unwrap();
        assert!(x[(0, 0)].abs() < 1e-9, "{}", x[(0, 0)]);
    }
}
