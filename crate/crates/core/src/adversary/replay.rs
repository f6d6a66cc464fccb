use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{AttackPlan, AttackPolicy, Channels, PlanKind};
use crate::error::{Error, Result};
use crate::system::AttackResources;

/// Constant open-loop physical signal on the selected `F` columns over
/// `[start, stop)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSignal {
    pub value: Vec<f64>,
    pub start: usize,
    pub stop: usize,
}

/// Record on disclosure channels over `[k0, kr]`, replay on deception
/// channels over `(kr, kf]` with shift `T = kr + 1 − k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayPlan {
    pub k0: usize,
    pub kr: usize,
    pub kf: usize,
    #[serde(default)]
    pub physical: Option<PhysicalSignal>,
}

impl ReplayPlan {
    pub fn shift(&self) -> usize {
        self.kr + 1 - self.k0
    }

    pub(super) fn validate(&self, r: &AttackResources) -> Result<()> {
        let (k0, kr, kf) = (self.k0, self.kr, self.kf);
        if !(k0 < kr && kr < kf) {
            return Err(Error::ReplaySchedule { k0, kr, kf });
        }
        let recorded = kr - k0 + 1;
        if kf - kr > recorded {
            return Err(Error::WindowTooShort {
                needed: kf - kr,
                recorded,
            });
        }
        let covered = r.decept_u.iter().all(|c| r.disclosure_u.contains(c))
            && r.decept_y.iter().all(|c| r.disclosure_y.contains(c));
        if !covered {
            return Err(Error::InvalidResources(
                "replayed channels must be disclosed channels".into(),
            ));
        }
        if let Some(sig) = &self.physical {
            if sig.value.len() != r.physical.len() {
                return Err(Error::DimensionMismatch(format!(
                    "physical signal has {} entries for {} selected columns",
                    sig.value.len(),
                    r.physical.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn replay_policy(
    resources: AttackResources,
    k0: usize,
    kr: usize,
    kf: usize,
    physical: Option<PhysicalSignal>,
) -> Result<AttackPlan> {
    let plan = ReplayPlan { k0, kr, kf, physical };
    plan.validate(&resources)?;
    Ok(AttackPlan {
        resources,
        kind: PlanKind::Replay(plan),
    })
}

/// Append-only record of the disclosed channel data from step `k0` on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisclosureLog {
    k0: usize,
    channels_y: Vec<usize>,
    channels_u: Vec<usize>,
    y: Vec<DVector<f64>>,
    u: Vec<DVector<f64>>,
}

impl DisclosureLog {
    pub fn new(k0: usize, channels_y: Vec<usize>, channels_u: Vec<usize>) -> Self {
        Self {
            k0,
            channels_y,
            channels_u,
            ..Default::default()
        }
    }

    pub fn start(&self) -> usize {
        self.k0
    }

    /// Appends `Υʸ y_k`; a step must be recorded exactly once, in order.
    pub fn push_y(&mut self, k: usize, y: &DVector<f64>) {
        assert_eq!(k, self.k0 + self.y.len(), "disclosure log is append-only");
        self.y.push(DVector::from_iterator(self.channels_y.len(), self.channels_y.iter().map(|&c| y[c])));
    }

    pub fn push_u(&mut self, k: usize, u: &DVector<f64>) {
        assert_eq!(k, self.k0 + self.u.len(), "disclosure log is append-only");
        self.u.push(DVector::from_iterator(self.channels_u.len(), self.channels_u.iter().map(|&c| u[c])));
    }

    /// Recorded value of sensor channel `c` at step `k`.
    pub fn y_at(&self, k: usize, c: usize) -> Option<f64> {
        let j = self.channels_y.iter().position(|&x| x == c)?;
        self.y.get(k.checked_sub(self.k0)?).map(|v| v[j])
    }

    pub fn u_at(&self, k: usize, c: usize) -> Option<f64> {
        let j = self.channels_u.iter().position(|&x| x == c)?;
        self.u.get(k.checked_sub(self.k0)?).map(|v| v[j])
    }

    pub fn len(&self) -> usize {
        self.y.len().max(self.u.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct ReplayPolicy {
    plan: ReplayPlan,
    log: DisclosureLog,
    decept_y: Vec<usize>,
    decept_u: Vec<usize>,
    physical: Vec<usize>,
    ch: Channels,
}

impl ReplayPolicy {
    pub fn new(plan: ReplayPlan, r: &AttackResources, ch: Channels) -> Self {
        Self {
            log: DisclosureLog::new(plan.k0, r.disclosure_y.clone(), r.disclosure_u.clone()),
            plan,
            decept_y: r.decept_y.clone(),
            decept_u: r.decept_u.clone(),
            physical: r.physical.clone(),
            ch,
        }
    }

    pub fn log(&self) -> &DisclosureLog {
        &self.log
    }

    fn replay(&self, k: usize, live: &DVector<f64>, sensor: bool) -> DVector<f64> {
        let mut out = DVector::zeros(live.len());
        if k <= self.plan.kr || k > self.plan.kf {
            return out;
        }
        let src = k - self.plan.shift();
        let channels = if sensor { &self.decept_y } else { &self.decept_u };
        for &c in channels {
            let rec = if sensor { self.log.y_at(src, c) } else { self.log.u_at(src, c) };
            out[c] = rec.expect("validated replay window") - live[c];
        }
        out
    }
}

impl AttackPolicy for ReplayPolicy {
    fn sensor(&mut self, k: usize, y: &DVector<f64>) -> DVector<f64> {
        if (self.plan.k0..=self.plan.kr).contains(&k) {
            self.log.push_y(k, y);
        }
        self.replay(k, y, true)
    }

    fn actuator(&mut self, k: usize, u: &DVector<f64>) -> DVector<f64> {
        if (self.plan.k0..=self.plan.kr).contains(&k) {
            self.log.push_u(k, u);
        }
        self.replay(k, u, false)
    }

    fn physical(&mut self, k: usize) -> DVector<f64> {
        let mut f = DVector::zeros(self.ch.faults);
        if let Some(sig) = &self.plan.physical {
            if (sig.start..sig.stop).contains(&k) {
                for (j, &c) in self.physical.iter().enumerate() {
                    f[c] = sig.value[j];
                }
            }
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res() -> AttackResources {
        AttackResources {
            disclosure_y: vec![0, 1],
            decept_y: vec![1],
            ..Default::default()
        }
    }

    #[test]
    fn schedule_checks() {
        assert!(matches!(replay_policy(res(), 5, 5, 8, None), Err(Error::ReplaySchedule { .. })));
        // recorded 10..=14 (5 samples), replay 15..=21 needs 7
        assert!(matches!(
            replay_policy(res(), 10, 14, 21, None),
            Err(Error::WindowTooShort { needed: 7, recorded: 5 })
        ));
        replay_policy(res(), 10, 14, 19, None).unwrap();
        let bad = AttackResources {
            decept_y: vec![1],
            disclosure_y: vec![0],
            ..Default::default()
        };
        assert!(matches!(replay_policy(bad, 1, 3, 5, None), Err(Error::InvalidResources(_))));
    }

    #[test]
    fn replays_recorded_value_shifted_by_t() {
        let plan = replay_policy(res(), 10, 19, 29, None).unwrap();
        let ch = Channels { inputs: 1, outputs: 2, faults: 0 };
        let mut pol = plan.policy(ch).unwrap();
        let live = |k: usize| DVector::from_vec(vec![k as f64, 100.0 + k as f64]);
        let t = 19 + 1 - 10;
        for k in 0..40 {
            let y = live(k);
            let yt = &y + pol.sensor(k, &y);
            assert_eq!(yt[0], y[0], "healthy channel untouched");
            if (20..=29).contains(&k) {
                assert_eq!(yt[1], live(k - t)[1]);
            } else {
                assert_eq!(yt[1], y[1]);
            }
        }
        assert_eq!(live(20 - t)[1], live(10)[1]);
    }

    #[test]
    fn log_is_append_only_on_disclosed_channels() {
        let mut log = DisclosureLog::new(3, vec![1], vec![]);
        log.push_y(3, &DVector::from_vec(vec![7.0, 8.0]));
        log.push_y(4, &DVector::from_vec(vec![9.0, 10.0]));
        assert_eq!(log.y_at(4, 1), Some(10.0));
        assert_eq!(log.y_at(4, 0), None);
        assert_eq!(log.y_at(2, 1), None);
        assert_eq!(log.len(), 2);
    }

    #[test]
    #[should_panic(expected = "append-only")]
    fn log_rejects_out_of_order() {
        let mut log = DisclosureLog::new(0, vec![0], vec![]);
        log.push_y(1, &DVector::from_vec(vec![1.0]));
    }
}
