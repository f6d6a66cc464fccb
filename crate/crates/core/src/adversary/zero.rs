use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AttackPlan, PlanKind};
use crate::error::{Error, Result};
use crate::numerics::{tall_pencil_zeros, transmission_zeros, ZeroChoice, ZeroSet};
use crate::system::{AttackResources, PlantModel};

/// `a_k = scale · g · ν^(k−k0)` on the actuators for `k ≥ k0`.
///
/// `g` and `x0` are given on the full input and state vectors; `x0` is the
/// initial deviation that makes the output identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPlan {
    pub nu: f64,
    pub g: Vec<f64>,
    pub x0: Vec<f64>,
    pub scale: f64,
    pub k0: usize,
    #[serde(default)]
    pub stop: Option<usize>,
}

impl ZeroPlan {
    pub fn input_at(&self, k: usize) -> DVector<f64> {
        let g = DVector::from_column_slice(&self.g);
        if k < self.k0 || self.stop.is_some_and(|s| k >= s) {
            return DVector::zeros(g.len());
        }
        g * (self.scale * self.nu.powi((k - self.k0) as i32))
    }

    /// Scaled matched initial state.
    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0) * self.scale
    }

    pub(super) fn reduced_at(&self, k: usize, r: &AttackResources) -> DVector<f64> {
        let u = self.input_at(k);
        let d = r.physical.len();
        let mut out = DVector::zeros(d + r.decept_u.len() + r.decept_y.len());
        for (j, &c) in r.decept_u.iter().enumerate() {
            out[d + j] = u[c];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSynthesis {
    pub plan: AttackPlan,
    pub zeros: ZeroSet,
    /// True when the chosen zero is stable, so the attack decays.
    pub stable_only: bool,
}

fn ensure_actuators(resources: &AttackResources, needed: &[usize]) -> Result<()> {
    if let Some(c) = needed.iter().find(|c| !resources.decept_u.contains(c)) {
        return Err(Error::InvalidResources(format!(
            "zero-dynamics attack needs deception on actuator {c}"
        )));
    }
    Ok(())
}

fn finish(
    zeros: ZeroSet,
    choice: ZeroChoice,
    resources: AttackResources,
    scale: f64,
    k0: usize,
    embed: impl Fn(&DVector<f64>, &DVector<f64>) -> (Vec<f64>, Vec<f64>),
    local: bool,
) -> Result<ZeroSynthesis> {
    let zero = zeros.select(choice).ok_or(Error::NoRealZero)?;
    let dir = zero.direction.as_ref().ok_or(Error::NoRealZero)?;
    let stable_only = zero.is_stable();
    if stable_only {
        warn!(
            "only a stable real zero is available (ν = {:.4}); the attack decays",
            zero.value.re
        );
    }
    let (x0, g) = embed(&dir.x0, &dir.g);
    let plan = ZeroPlan {
        nu: zero.value.re,
        g,
        x0,
        scale,
        k0,
        stop: None,
    };
    let kind = if local { PlanKind::LocalZero(plan) } else { PlanKind::Zero(plan) };
    Ok(ZeroSynthesis {
        plan: AttackPlan { resources, kind },
        zeros,
        stable_only,
    })
}

/// Zero-dynamics attack on all actuators from the transmission zeros of
/// `(A, B, C)`.
pub fn synth_zero_attack(
    plant: &PlantModel,
    resources: AttackResources,
    choice: ZeroChoice,
    scale: f64,
    k0: usize,
) -> Result<ZeroSynthesis> {
    let all: Vec<usize> = (0..plant.inputs()).collect();
    ensure_actuators(&resources, &all)?;
    let zeros = transmission_zeros(&plant.a, &plant.b, &plant.c)?;
    finish(
        zeros,
        choice,
        resources,
        scale,
        k0,
        |x0, g| (x0.iter().cloned().collect(), g.iter().cloned().collect()),
        false,
    )
}

/// States, actuators and sensors of the subsystem the adversary knows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPartition {
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl LocalPartition {
    /// `(A11, A21, B1, C1)` of the partitioned plant.
    pub fn blocks(&self, plant: &PlantModel) -> Result<[DMatrix<f64>; 4]> {
        let n = plant.states();
        for (set, total) in [
            (&self.states, n),
            (&self.inputs, plant.inputs()),
            (&self.outputs, plant.outputs()),
        ] {
            if let Some(&c) = set.iter().find(|&&c| c >= total) {
                return Err(Error::IndexOutOfRange { index: c, total });
            }
        }
        let rest: Vec<usize> = (0..n).filter(|i| !self.states.contains(i)).collect();
        let pick = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
        };
        Ok([
            pick(&plant.a, &self.states, &self.states),
            pick(&plant.a, &rest, &self.states),
            pick(&plant.b, &self.states, &self.inputs),
            pick(&plant.c, &self.outputs, &self.states),
        ])
    }
}

/// Zero-dynamics attack computed from local knowledge only: the zeros of
/// `[νI − A11, −B1; C1, 0; A21, 0]`, so the attack is invisible to the local
/// outputs and does not excite the rest of the plant.
pub fn synth_local_zero_attack(
    plant: &PlantModel,
    partition: &LocalPartition,
    resources: AttackResources,
    choice: ZeroChoice,
    scale: f64,
    k0: usize,
) -> Result<ZeroSynthesis> {
    ensure_actuators(&resources, &partition.inputs)?;
    let [a11, a21, b1, c1] = partition.blocks(plant)?;
    let out = DMatrix::from_fn(c1.nrows() + a21.nrows(), a11.ncols(), |i, j| {
        if i < c1.nrows() {
            c1[(i, j)]
        } else {
            a21[(i - c1.nrows(), j)]
        }
    });
    let zeros = tall_pencil_zeros(&a11, &b1, &out)?;
    let (n, q) = (plant.states(), plant.inputs());
    let embed = |x0: &DVector<f64>, g: &DVector<f64>| {
        let mut xf = vec![0.0; n];
        let mut gf = vec![0.0; q];
        for (j, &s) in partition.states.iter().enumerate() {
            xf[s] = x0[j];
        }
        for (j, &c) in partition.inputs.iter().enumerate() {
            gf[c] = g[j];
        }
        (xf, gf)
    };
    finish(zeros, choice, resources, scale, k0, embed, true)
}
