//! Seeded closed-loop simulation, attack-response systems, controller design
//! and the quadruple-tank plant.

mod discretize;
mod lqg;
mod qtp;
mod response;

pub use discretize::{discretize, Discretization};
pub use lqg::{design_lqg, LqgSpec};
pub use qtp::{qtp_equilibrium, qtp_jacobian, qtp_linearize, qtp_rhs, qtp_step, QtpParams, QtpPlant, QtpStep};
pub use response::{simulate_response, Response};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackPlan, Channels, PolicyStats};
use crate::error::{Error, Result};
use crate::safety::{alarm, SafeSet};
use crate::system::{ControllerModel, DetectorModel, PlantModel};

/// Result of advancing the true plant one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Next state (deviation coordinates), after any clipping.
    pub next: DVector<f64>,
    /// Physical state before clipping, used for the safety flag.
    pub unclipped: DVector<f64>,
    pub saturated: bool,
}

/// The plant the loop closes around. `model()` is the linear model the
/// controller and detector were designed for.
pub trait PlantDynamics: Sync {
    fn model(&self) -> &PlantModel;
    /// Physical coordinates of a deviation state.
    fn physical(&self, x: &DVector<f64>) -> DVector<f64>;
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.model().c * x
    }
    /// Advances with applied input `u`, process noise `w` and physical attack `f`.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, f: &DVector<f64>) -> StepOutcome;
}

/// `x⁺ = Ax + Bu + Gw + Ff`
#[derive(Debug, Clone)]
pub struct LinearPlant {
    pub model: PlantModel,
}

impl LinearPlant {
    pub fn new(model: PlantModel) -> Self {
        Self { model }
    }
}

impl PlantDynamics for LinearPlant {
    fn model(&self) -> &PlantModel {
        &self.model
    }
    fn physical(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, f: &DVector<f64>) -> StepOutcome {
        let m = &self.model;
        let next = &m.a * x + &m.b * u + &m.g * w + &m.f * f;
        StepOutcome {
            unclipped: next.clone(),
            next,
            saturated: false,
        }
    }
}

/// Zero-mean Gaussian noise standard deviations. A single entry is broadcast
/// to every channel; an empty list means no noise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub process_std: Vec<f64>,
    #[serde(default)]
    pub measurement_std: Vec<f64>,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn isotropic(process: f64, measurement: f64) -> Self {
        Self {
            process_std: vec![process],
            measurement_std: vec![measurement],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            process_std: self.process_std.iter().map(|x| x * s).collect(),
            measurement_std: self.measurement_std.iter().map(|x| x * s).collect(),
        }
    }

    fn expand(list: &[f64], n: usize, what: &str) -> Result<DVector<f64>> {
        match list.len() {
            0 => Ok(DVector::zeros(n)),
            1 => Ok(DVector::from_element(n, list[0])),
            len if len == n => Ok(DVector::from_column_slice(list)),
            len => Err(Error::DimensionMismatch(format!("{what} noise has {len} entries for {n} channels"))),
        }
    }

    fn checked(&self, nw: usize, p: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let w = Self::expand(&self.process_std, nw, "process")?;
        let v = Self::expand(&self.measurement_std, p, "measurement")?;
        if w.iter().chain(v.iter()).any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("noise standard deviations must be finite and nonnegative".into()));
        }
        Ok((w, v))
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub horizon: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// `NumericalBlowup` once `‖x_k‖` exceeds this.
    pub guard: f64,
    pub x0: Option<DVector<f64>>,
    pub safe_set: Option<SafeSet>,
}

impl SimConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            noise: NoiseSpec::none(),
            guard: 1e8,
            x0: None,
            safe_set: None,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_safe_set(mut self, set: SafeSet) -> Self {
        self.safe_set = Some(set);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub k: usize,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub xhat: DVector<f64>,
    pub u: DVector<f64>,
    pub utilde: DVector<f64>,
    pub y: DVector<f64>,
    pub ytilde: DVector<f64>,
    pub r: DVector<f64>,
    /// Channel-level corruption `[F-column signal; ũ − u; ỹ − y]`.
    pub attack: DVector<f64>,
    pub alarm: bool,
    pub safe: bool,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub config_hash: Option<String>,
    pub sample_time: f64,
    pub states: usize,
    pub controller_states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub residues: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<Step>,
    pub stats: PolicyStats,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn residuals(&self) -> Vec<DVector<f64>> {
        self.steps.iter().map(|s| s.r.clone()).collect()
    }

    pub fn states(&self) -> Vec<DVector<f64>> {
        self.steps.iter().map(|s| s.x.clone()).collect()
    }

    pub fn first_alarm(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.alarm).map(|s| s.k)
    }

    pub fn first_unsafe(&self) -> Option<usize> {
        self.steps.iter().find(|s| !s.safe).map(|s| s.k)
    }

    pub fn first_saturation(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.saturated).map(|s| s.k)
    }
}

/// Simulates the loop with channel-level corruption.
///
/// Per step: measure, corrupt sensors, update the detector, run the
/// controller, corrupt actuators, record, advance the plant. Noise is drawn
/// from its own seeded stream (measurement first, then process), so runs
/// differing only in the attack see identical noise.
pub fn simulate_loop(
    plant: &dyn PlantDynamics,
    controller: &ControllerModel,
    detector: &DetectorModel,
    plan: &AttackPlan,
    cfg: &SimConfig,
) -> Result<Trace> {
    let model = plant.model();
    controller.check(model)?;
    detector.check(model)?;
    let (n, q, p) = (model.states(), model.inputs(), model.outputs());
    let nw = model.g.ncols();
    let (w_std, v_std) = cfg.noise.checked(nw, p)?;
    let ch = Channels {
        inputs: q,
        outputs: p,
        faults: model.faults(),
    };
    let mut policy = plan.policy(ch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut x = cfg.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has {} entries for {n} states", x.len())));
    }
    let mut unclipped_phys = plant.physical(&x);
    let mut saturated = false;
    let mut z = DVector::zeros(controller.states());
    let mut xhat = DVector::zeros(n);
    let mut u_prev = DVector::zeros(q);
    let (a, b, c) = (&model.a, &model.b, &model.c);
    let mut steps = Vec::with_capacity(cfg.horizon);

    for k in 0..cfg.horizon {
        let norm = x.norm();
        if !norm.is_finite() || norm > cfg.guard {
            return Err(Error::NumericalBlowup { step: k, norm });
        }
        let v = draw(&mut rng, &v_std);
        let w = draw(&mut rng, &w_std);

        let y = plant.output(&x) + v;
        let dy = policy.sensor(k, &y);
        let ytilde = &y + &dy;

        let pred = a * &xhat + b * &u_prev;
        let innov = &ytilde - c * &pred;
        xhat = &pred + &detector.k * innov;
        let r = &detector.v * (&ytilde - c * &xhat);

        let u = &controller.cc * &z + &controller.dc * &ytilde;
        let z_next = &controller.ac * &z + &controller.bc * &ytilde;
        let du = policy.actuator(k, &u);
        let utilde = &u + &du;
        let f = policy.physical(k);

        let safe = cfg.safe_set.as_ref().is_none_or(|s| s.contains(&unclipped_phys));
        let alarm = alarm(&r, detector.delta_r, detector.delta_alpha);
        let attack = crate::numerics::vstack(&[&f, &du, &dy]);

        let out = plant.step(&x, &utilde, &w, &f);
        steps.push(Step {
            k,
            x: std::mem::replace(&mut x, out.next),
            z: std::mem::replace(&mut z, z_next),
            xhat: xhat.clone(),
            u: u.clone(),
            utilde,
            y,
            ytilde,
            r,
            attack,
            alarm,
            safe,
            saturated,
        });
        unclipped_phys = out.unclipped;
        saturated = out.saturated;
        u_prev = u;
    }

    Ok(Trace {
        header: TraceHeader {
            seed: cfg.seed,
            config_hash: None,
            sample_time: model.sample_time,
            states: n,
            controller_states: controller.states(),
            inputs: q,
            outputs: p,
            residues: detector.residues(),
        },
        steps,
        stats: policy.stats(),
    })
}

fn draw(rng: &mut ChaCha8Rng, std: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        std.len(),
        std.iter().map(|s| {
            let e: f64 = StandardNormal.sample(rng);
            s * e
        }),
    )
}

/// Empirical quantile (nearest rank) of the nominal residual norms.
pub fn residual_quantile(trace: &Trace, skip: usize, quantile: f64) -> f64 {
    let mut norms: Vec<f64> = trace.steps.iter().skip(skip).map(|s| s.r.norm()).collect();
    if norms.is_empty() {
        return 0.0;
    }
    norms.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    let idx = ((quantile * norms.len() as f64).ceil() as usize).clamp(1, norms.len()) - 1;
    norms[idx]
}

/// Rescales `shape` so that the `quantile` of the nominal residual norm is
/// `target`. For a linear loop the residual is linear in the noise, so one
/// calibration run fixes the scale exactly.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_noise(
    plant: &dyn PlantDynamics,
    controller: &ControllerModel,
    detector: &DetectorModel,
    shape: &NoiseSpec,
    target: f64,
    quantile: f64,
    steps: usize,
    seed: u64,
) -> Result<NoiseSpec> {
    let cfg = SimConfig::new(steps, seed).with_noise(shape.clone());
    let trace = simulate_loop(plant, controller, detector, &AttackPlan::none(), &cfg)?;
    let q = residual_quantile(&trace, steps / 10, quantile);
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("noise shape produces no residual".into()));
    }
    Ok(shape.scaled(target / q))
}
