//! Attack plans and the stateful policies that realize them on the
//! actuator/sensor channels.
//!
//! A plan is plain data (serializable metadata included). Calling
//! [`AttackPlan::policy`] yields a fresh policy, so the same plan can drive any
//! number of independent, reproducible runs.

mod bias;
mod dos;
mod replay;
mod zero;

pub use bias::{
    bias_transient, build_bias_autonomous, default_horizon, BiasNorm, synth_bias_2norm, synth_bias_infnorm,
    verify_alpha_stealthy, BiasAutonomous, BiasPlan, BiasSolution, BiasTransient, StealthCertificate,
};
pub use dos::{dos_policy, DosPlan, DosPolicy};
pub use replay::{replay_policy, DisclosureLog, PhysicalSignal, ReplayPlan, ReplayPolicy};
pub use zero::{synth_local_zero_attack, synth_zero_attack, LocalPartition, ZeroPlan, ZeroSynthesis};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{incidence, AttackLayout, AttackResources};

/// Channel counts of the loop a policy acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channels {
    pub inputs: usize,
    pub outputs: usize,
    pub faults: usize,
}

/// Deviations a policy adds at the channel interface: `ỹ = y + sensor`,
/// `ũ = u + actuator`, and `F · physical` on the plant.
pub trait AttackPolicy {
    fn sensor(&mut self, k: usize, y: &DVector<f64>) -> DVector<f64>;
    fn actuator(&mut self, k: usize, u: &DVector<f64>) -> DVector<f64>;
    fn physical(&mut self, k: usize) -> DVector<f64>;
    fn stats(&self) -> PolicyStats {
        PolicyStats::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub draws: usize,
    pub blocked: usize,
}

/// Explicit per-step reduced attack values `[f; bᵘ; bʸ]` starting at `k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan {
    pub k0: usize,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum PlanKind {
    None,
    Dos(DosPlan),
    Replay(ReplayPlan),
    Zero(ZeroPlan),
    LocalZero(ZeroPlan),
    Bias(BiasPlan),
    Sequence(SequencePlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub resources: AttackResources,
    #[serde(flatten)]
    pub kind: PlanKind,
}

impl AttackPlan {
    pub fn none() -> Self {
        Self {
            resources: AttackResources::none(),
            kind: PlanKind::None,
        }
    }

    pub fn scenario(&self) -> &'static str {
        match self.kind {
            PlanKind::None => "none",
            PlanKind::Dos(_) => "dos",
            PlanKind::Replay(_) => "replay",
            PlanKind::Zero(_) => "zero",
            PlanKind::LocalZero(_) => "local-zero",
            PlanKind::Bias(_) => "bias",
            PlanKind::Sequence(_) => "sequence",
        }
    }

    /// Step at which the attack starts.
    pub fn start(&self) -> usize {
        match &self.kind {
            PlanKind::None => 0,
            PlanKind::Dos(p) => p.k0,
            PlanKind::Replay(p) => p.k0,
            PlanKind::Zero(p) | PlanKind::LocalZero(p) => p.k0,
            PlanKind::Bias(p) => p.k0,
            PlanKind::Sequence(p) => p.k0,
        }
    }

    /// Whether the corruption is a fixed signal independent of the loop data,
    /// so that superposition with the nominal run holds.
    pub fn is_linear(&self) -> bool {
        matches!(
            self.kind,
            PlanKind::None | PlanKind::Zero(_) | PlanKind::LocalZero(_) | PlanKind::Bias(_) | PlanKind::Sequence(_)
        )
    }

    fn layout(&self) -> AttackLayout {
        AttackLayout {
            physical: self.resources.physical.len(),
            actuator: self.resources.decept_u.len(),
            sensor: self.resources.decept_y.len(),
        }
    }

    /// Reduced attack `[f_k; bᵘ_k; bʸ_k]` of a linear plan at step `k`.
    pub fn reduced_at(&self, k: usize) -> Option<DVector<f64>> {
        let lay = self.layout();
        let zero = DVector::zeros(lay.reduced_dim());
        match &self.kind {
            PlanKind::None => Some(zero),
            PlanKind::Zero(p) | PlanKind::LocalZero(p) => Some(p.reduced_at(k, &self.resources)),
            PlanKind::Bias(p) => Some(p.reduced_at(k, &lay)),
            PlanKind::Sequence(p) => Some(if k < p.k0 {
                zero
            } else {
                p.values
                    .get(k - p.k0)
                    .map(|v| DVector::from_column_slice(v))
                    .unwrap_or(zero)
            }),
            PlanKind::Dos(_) | PlanKind::Replay(_) => None,
        }
    }

    /// Attack vector `a_k = [f_k; bᵘ_k; bʸ_{k+1}; bʸ_k]` of a linear plan in
    /// the loop layout, for `k = 0..horizon`.
    pub fn layout_signal(&self, horizon: usize) -> Option<Vec<DVector<f64>>> {
        let lay = self.layout();
        (0..horizon)
            .map(|k| {
                let now = self.reduced_at(k)?;
                let next = self.reduced_at(k + 1)?;
                let (f, bu, by) = lay.split_reduced(&now);
                let (_, _, by_next) = lay.split_reduced(&next);
                Some(lay.assemble(&f, &bu, &by_next, &by))
            })
            .collect()
    }

    pub fn validate(&self, ch: Channels) -> Result<()> {
        let r = &self.resources;
        for (set, total) in [
            (&r.disclosure_u, ch.inputs),
            (&r.decept_u, ch.inputs),
            (&r.dos_u, ch.inputs),
            (&r.disclosure_y, ch.outputs),
            (&r.decept_y, ch.outputs),
            (&r.dos_y, ch.outputs),
            (&r.physical, ch.faults),
        ] {
            if let Some(&c) = set.iter().find(|&&c| c >= total) {
                return Err(Error::IndexOutOfRange { index: c, total });
            }
        }
        match &self.kind {
            PlanKind::Dos(p) => p.validate(r),
            PlanKind::Replay(p) => p.validate(r),
            PlanKind::Sequence(p) => {
                let dim = self.layout().reduced_dim();
                if p.values.iter().any(|v| v.len() != dim) {
                    return Err(Error::DimensionMismatch(format!("sequence entries must have length {dim}")));
                }
                Ok(())
            }
            PlanKind::Bias(p) => {
                if p.a_infinity.len() != self.layout().reduced_dim() {
                    return Err(Error::DimensionMismatch("a_infinity does not match the resource layout".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn policy(&self, ch: Channels) -> Result<Box<dyn AttackPolicy + Send>> {
        self.validate(ch)?;
        Ok(match &self.kind {
            PlanKind::Dos(p) => Box::new(DosPolicy::new(p.clone(), &self.resources, ch)),
            PlanKind::Replay(p) => Box::new(ReplayPolicy::new(p.clone(), &self.resources, ch)),
            _ => Box::new(LinearPolicy::new(self.clone(), ch)?),
        })
    }
}

/// Realizes a linear plan on the full channel vectors.
struct LinearPolicy {
    plan: AttackPlan,
    layout: AttackLayout,
    gamma_u: DMatrix<f64>,
    gamma_y: DMatrix<f64>,
    select_f: DMatrix<f64>,
}

impl LinearPolicy {
    fn new(plan: AttackPlan, ch: Channels) -> Result<Self> {
        let r = &plan.resources;
        Ok(Self {
            layout: plan.layout(),
            gamma_u: incidence(&r.decept_u, ch.inputs)?,
            gamma_y: incidence(&r.decept_y, ch.outputs)?,
            select_f: incidence(&r.physical, ch.faults)?,
            plan,
        })
    }

    fn split(&self, k: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let v = self.plan.reduced_at(k).expect("linear plan");
        self.layout.split_reduced(&v)
    }
}

impl AttackPolicy for LinearPolicy {
    fn sensor(&mut self, k: usize, _y: &DVector<f64>) -> DVector<f64> {
        &self.gamma_y * self.split(k).2
    }
    fn actuator(&mut self, k: usize, _u: &DVector<f64>) -> DVector<f64> {
        &self.gamma_u * self.split(k).1
    }
    fn physical(&mut self, k: usize) -> DVector<f64> {
        &self.select_f * self.split(k).0
    }
}
