use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::system::LoopSystem;

/// Noise-free attack response `(η^a, ỹ^a, r^a)` of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub eta: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub r: Vec<DVector<f64>>,
}

impl Response {
    /// Plant part `x^a_k` of the augmented state.
    pub fn plant_states(&self, n: usize) -> Vec<DVector<f64>> {
        self.eta.iter().map(|e| e.rows(0, n).into_owned()).collect()
    }
}

/// Drives the closed-loop and detector-error systems with the layout signal
/// `a_k = [f_k; bᵘ_k; bʸ_{k+1}; bʸ_k]` for `k = 0..signal.len()`.
///
/// The detector starts from `x̂_{−1} = 0`, `u_{−1} = 0`, matching
/// [`simulate_loop`](super::simulate_loop), so `r^a_0 = V(I − CK) ỹ^a_0`.
pub fn simulate_response(lp: &LoopSystem, signal: &[DVector<f64>], eta0: Option<&DVector<f64>>) -> Result<Response> {
    let (cl, er) = (&lp.closed, &lp.error);
    let dim = lp.layout.dim();
    if let Some(a) = signal.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch(format!("attack has {} entries, layout needs {dim}", a.len())));
    }
    let total = cl.a.nrows();
    let mut eta = match eta0 {
        Some(e) if e.len() != total => {
            return Err(Error::DimensionMismatch(format!("η0 has {} entries for {total} states", e.len())))
        }
        Some(e) => e.clone(),
        None => DVector::zeros(total),
    };
    let n = lp.plant.states();
    let k = &lp.detector.k;
    let v = &lp.detector.v;

    let mut out = Response {
        eta: Vec::with_capacity(signal.len()),
        y: Vec::with_capacity(signal.len()),
        r: Vec::with_capacity(signal.len()),
    };
    let mut xi = DVector::zeros(n);
    for (step, a) in signal.iter().enumerate() {
        let y = &cl.c * &eta + &cl.d * a;
        let r = if step == 0 {
            let xhat = k * &y;
            xi = eta.rows(0, n) - &xhat;
            v * (&y - &lp.plant.c * xhat)
        } else {
            let prev = &signal[step - 1];
            let r = &er.c * &xi + &er.d * prev;
            xi = &er.a * &xi + &er.b * prev;
            r
        };
        let next = &cl.a * &eta + &cl.b * a;
        out.eta.push(std::mem::replace(&mut eta, next));
        out.y.push(y);
        out.r.push(r);
    }
    Ok(out)
}
