use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackPlan, AttackPolicy, Channels, PlanKind, PolicyStats};
use crate::error::{Error, Result};
use crate::system::AttackResources;

/// Bernoulli packet blocking on the DoS channels from `k0` on (until `stop`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosPlan {
    pub p: f64,
    pub k0: usize,
    #[serde(default)]
    pub stop: Option<usize>,
    pub seed: u64,
}

impl DosPlan {
    pub(super) fn validate(&self, r: &AttackResources) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("DoS probability {} outside [0, 1]", self.p)));
        }
        if r.dos_u.is_empty() && r.dos_y.is_empty() {
            return Err(Error::InvalidResources("DoS plan without DoS channels".into()));
        }
        Ok(())
    }

    fn active(&self, k: usize) -> bool {
        k >= self.k0 && self.stop.is_none_or(|s| k < s)
    }
}

pub fn dos_policy(resources: AttackResources, p: f64, k0: usize, seed: u64) -> Result<AttackPlan> {
    let plan = DosPlan { p, k0, stop: None, seed };
    plan.validate(&resources)?;
    Ok(AttackPlan {
        resources,
        kind: PlanKind::Dos(plan),
    })
}

/// Holds the last delivered value on every blocked channel.
pub struct DosPolicy {
    plan: DosPlan,
    rng: ChaCha8Rng,
    dos_u: Vec<usize>,
    dos_y: Vec<usize>,
    last_u: Option<DVector<f64>>,
    last_y: Option<DVector<f64>>,
    stats: PolicyStats,
    ch: Channels,
}

impl DosPolicy {
    pub fn new(plan: DosPlan, r: &AttackResources, ch: Channels) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            plan,
            dos_u: r.dos_u.clone(),
            dos_y: r.dos_y.clone(),
            last_u: None,
            last_y: None,
            stats: PolicyStats::default(),
            ch,
        }
    }

    fn hold(
        &mut self,
        k: usize,
        live: &DVector<f64>,
        sensor: bool,
    ) -> DVector<f64> {
        let channels = if sensor { self.dos_y.clone() } else { self.dos_u.clone() };
        let active = self.plan.active(k);
        let mut last = if sensor { self.last_y.take() } else { self.last_u.take() }
            .unwrap_or_else(|| live.clone());
        let mut out = DVector::zeros(live.len());
        for i in 0..live.len() {
            let attacked = channels.contains(&i);
            let blocked = if attacked && active {
                self.stats.draws += 1;
                self.rng.random_bool(self.plan.p)
            } else {
                false
            };
            if blocked {
                self.stats.blocked += 1;
                out[i] = last[i] - live[i];
            } else {
                last[i] = live[i];
            }
        }
        if sensor {
            self.last_y = Some(last);
        } else {
            self.last_u = Some(last);
        }
        out
    }
}

impl AttackPolicy for DosPolicy {
    fn sensor(&mut self, k: usize, y: &DVector<f64>) -> DVector<f64> {
        self.hold(k, y, true)
    }
    fn actuator(&mut self, k: usize, u: &DVector<f64>) -> DVector<f64> {
        self.hold(k, u, false)
    }
    fn physical(&mut self, _k: usize) -> DVector<f64> {
        DVector::zeros(self.ch.faults)
    }
    fn stats(&self) -> PolicyStats {
        self.stats
    }
}
