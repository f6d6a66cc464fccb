use std::io::Write;
use std::path::Path;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::{matrix, width, zero_based, AttackConfig, ControllerSource, Dynamics, PlantSource, ScenarioConfig};
use crate::adversary::{
    build_bias_autonomous, synth_bias_2norm, synth_bias_infnorm, synth_local_zero_attack, synth_zero_attack,
    verify_alpha_stealthy, AttackPlan, BiasNorm, BiasPlan, DosPlan, LocalPartition, PlanKind, PolicyStats,
    ReplayPlan, StealthCertificate,
};
use crate::error::{Error, Result};
use crate::numerics::ZeroSet;
use crate::safety::{classify_trace, StealthReport};
use crate::sim::{
    calibrate_noise, design_lqg, simulate_loop, LinearPlant, NoiseSpec, PlantDynamics, QtpPlant, SimConfig, Trace,
};
use crate::system::{steady_state_gains, ControllerModel, DetectorModel, LoopSystem, PlantModel};

pub const TRACE_SCHEMA: &str = "secctl-trace/1";
pub const SUMMARY_SCHEMA: &str = "secctl-summary/1";

/// Derives the blocking seed of a DoS plan without an explicit one.
fn derived_seed(run_seed: u64) -> u64 {
    run_seed ^ 0x9e37_79b9_7f4a_7c15
}

/// What synthesis produced, for the summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SynthesisInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeros: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable_only: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_infinity: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    /// Maximizing state of the ∞-norm synthesis, 1-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_a_infinity: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_deviation: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateInfo {
    pub pass: bool,
    pub max_residual: f64,
    pub argmax: usize,
    pub horizon: usize,
}

impl From<&StealthCertificate> for CertificateInfo {
    fn from(c: &StealthCertificate) -> Self {
        Self {
            pass: c.pass,
            max_residual: c.max_residual,
            argmax: c.argmax,
            horizon: c.horizon,
        }
    }
}

fn zero_list(z: &ZeroSet) -> Vec<[f64; 2]> {
    z.zeros.iter().map(|t| [t.value.re, t.value.im]).collect()
}

/// Everything needed to simulate a config, independent of the run seed.
pub struct Prepared {
    pub config: ScenarioConfig,
    pub hash: String,
    pub plant: Box<dyn PlantDynamics + Send>,
    pub controller: ControllerModel,
    pub detector: DetectorModel,
    pub noise: NoiseSpec,
    /// Loop model with the attack's resources.
    pub loop_system: LoopSystem,
    pub plan: AttackPlan,
    pub synthesis: SynthesisInfo,
    pub x0: Option<DVector<f64>>,
    pub operating_point: Option<Vec<f64>>,
}

/// Dynamics, optional initial state, optional operating input.
type BuiltPlant = (Box<dyn PlantDynamics + Send>, Option<DVector<f64>>, Option<Vec<f64>>);

fn build_plant(src: &PlantSource) -> Result<BuiltPlant> {
    match src {
        PlantSource::Linear {
            a,
            b,
            c,
            g,
            f,
            sample_time,
            x0,
        } => {
            let n = a.len();
            let a = matrix(a, n, n, "plant a")?;
            let b = matrix(b, n, width(b), "plant b")?;
            let c = matrix(c, c.len(), n, "plant c")?;
            let mut model = PlantModel::new(a, b, c)?;
            if let Some(g) = g {
                model.g = matrix(g, n, width(g), "plant g")?;
            }
            if let Some(f) = f {
                model.f = matrix(f, n, width(f), "plant f")?;
            }
            model.sample_time = *sample_time;
            let model = model.validated()?;
            let x0 = match x0 {
                Some(v) if v.len() != n => return Err(Error::ConfigInvalid(format!("x0 must have {n} entries"))),
                Some(v) => Some(DVector::from_column_slice(v)),
                None => None,
            };
            Ok((Box::new(LinearPlant::new(model)), x0, None))
        }
        PlantSource::Qtp {
            phase,
            operating_input,
            sample_time,
            dynamics,
            params,
        } => {
            let plant = QtpPlant::new(params.apply(*phase), *operating_input, *sample_time)?;
            let op = Some(plant.h_star.to_vec());
            Ok(match dynamics {
                Dynamics::Nonlinear => (Box::new(plant), None, op),
                Dynamics::Linearized => (Box::new(ShiftedLinear { lin: LinearPlant::new(plant.model.clone()), plant }), None, op),
            })
        }
    }
}

/// Linearized tank dynamics reported in physical (absolute level) coordinates.
struct ShiftedLinear {
    lin: LinearPlant,
    plant: QtpPlant,
}

impl PlantDynamics for ShiftedLinear {
    fn model(&self) -> &PlantModel {
        &self.lin.model
    }
    fn physical(&self, x: &DVector<f64>) -> DVector<f64> {
        self.plant.physical(x)
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, f: &DVector<f64>) -> crate::sim::StepOutcome {
        let mut out = self.lin.step(x, u, w, f);
        out.unclipped = self.plant.physical(&out.next);
        out
    }
}

fn build_controller(src: &ControllerSource, plant: &PlantModel, cfg: &ScenarioConfig) -> Result<(ControllerModel, DetectorModel)> {
    let t = cfg.detector;
    match src {
        ControllerSource::Lqg(spec) => design_lqg(plant, spec, t.delta_r, t.delta_alpha),
        ControllerSource::Explicit { ac, bc, cc, dc, k, v } => {
            let (n, q, p) = (plant.states(), plant.inputs(), plant.outputs());
            let m = ac.len();
            let ctrl = ControllerModel::new(
                matrix(ac, m, m, "controller ac")?,
                matrix(bc, m, p, "controller bc")?,
                matrix(cc, q, m, "controller cc")?,
                matrix(dc, q, p, "controller dc")?,
            );
            let mut det = DetectorModel::new(matrix(k, n, p, "detector k")?, t.delta_r, t.delta_alpha);
            if let Some(v) = v {
                det.v = matrix(v, v.len(), p, "detector v")?;
            }
            ctrl.check(plant)?;
            det.check(plant)?;
            Ok((ctrl, det))
        }
    }
}

/// Builds the loop, calibrates noise and synthesizes the attack.
pub fn prepare(config: &ScenarioConfig) -> Result<Prepared> {
    let (plant, mut x0, operating_point) = build_plant(&config.plant)?;
    let model = plant.model().clone();
    let (controller, detector) = build_controller(&config.controller, &model, config)?;
    config.safe_set.validate(model.states())?;

    let shape = NoiseSpec {
        process_std: config.noise.process_std.clone(),
        measurement_std: config.noise.measurement_std.clone(),
    };
    let noise = match &config.noise.calibrate {
        Some(c) => {
            let n = calibrate_noise(plant.as_ref(), &controller, &detector, &shape, c.target, c.quantile, c.steps, c.seed)?;
            info!("calibrated noise: {:?}", n);
            n
        }
        None => shape,
    };

    let resources = config.attack.resources().to_resources()?;
    let loop_system = LoopSystem::new(model.clone(), controller.clone(), detector.clone(), resources.clone())?;
    let mut synthesis = SynthesisInfo::default();
    let kind = match &config.attack {
        AttackConfig::None { .. } => PlanKind::None,
        AttackConfig::Dos { p, k0, stop, seed, .. } => PlanKind::Dos(DosPlan {
            p: *p,
            k0: *k0,
            stop: *stop,
            seed: seed.unwrap_or_else(|| derived_seed(config.seed)),
        }),
        AttackConfig::Replay { k0, kr, kf, physical, .. } => PlanKind::Replay(ReplayPlan {
            k0: *k0,
            kr: *kr,
            kf: *kf,
            physical: physical.clone(),
        }),
        AttackConfig::Zero {
            choice,
            scale,
            k0,
            stop,
            match_initial_state,
            ..
        }
        | AttackConfig::LocalZero {
            choice,
            scale,
            k0,
            stop,
            match_initial_state,
            ..
        } => {
            let syn = match &config.attack {
                AttackConfig::LocalZero { partition, .. } => {
                    let part = LocalPartition {
                        states: zero_based(&partition.states, "partition states")?,
                        inputs: zero_based(&partition.inputs, "partition inputs")?,
                        outputs: zero_based(&partition.outputs, "partition outputs")?,
                    };
                    synth_local_zero_attack(&model, &part, resources.clone(), *choice, *scale, *k0)?
                }
                _ => synth_zero_attack(&model, resources.clone(), *choice, *scale, *k0)?,
            };
            synthesis.zeros = Some(zero_list(&syn.zeros));
            synthesis.stable_only = Some(syn.stable_only);
            let mut kind = syn.plan.kind;
            if let PlanKind::Zero(p) | PlanKind::LocalZero(p) = &mut kind {
                p.stop = *stop;
                synthesis.nu = Some(p.nu);
                synthesis.g = Some(p.g.clone());
                synthesis.x0 = Some(p.x0.clone());
                if *match_initial_state {
                    x0 = Some(p.initial_state());
                }
            }
            kind
        }
        AttackConfig::Bias {
            norm,
            beta,
            k0,
            a_infinity,
            scale,
            reference_a_infinity,
            ..
        } => {
            let (g_ra, g_xa) = steady_state_gains(&loop_system)?;
            let (a_inf, lambda_star, row) = match a_infinity {
                Some(a) => (DVector::from_column_slice(a), None, None),
                None => {
                    let sol = match norm {
                        BiasNorm::Two => synth_bias_2norm(&g_xa, &g_ra, detector.delta_alpha)?,
                        BiasNorm::Inf => synth_bias_infnorm(&g_xa, &g_ra, detector.delta_alpha)?,
                    };
                    (sol.a_infinity, Some(sol.lambda_star), sol.row)
                }
            };
            let a_inf = a_inf * *scale;
            let auto = build_bias_autonomous(&loop_system, &a_inf, *beta)?;
            let cert = verify_alpha_stealthy(&auto, detector.delta_alpha, None, 1e-6);
            debug!("bias certificate: pass={} max={}", cert.pass, cert.max_residual);
            synthesis.a_infinity = Some(a_inf.iter().cloned().collect());
            synthesis.lambda_star = lambda_star;
            synthesis.row = row.map(|r| r + 1);
            synthesis.reference_a_infinity = reference_a_infinity.clone();
            synthesis.steady_state_deviation = Some((&g_xa * &a_inf).iter().cloned().collect());
            synthesis.certificate = Some(CertificateInfo::from(&cert));
            PlanKind::Bias(BiasPlan {
                a_infinity: a_inf.iter().cloned().collect(),
                beta: *beta,
                k0: *k0,
                lambda_star,
                row,
            })
        }
    };
    let plan = AttackPlan { resources, kind };
    let ch = crate::adversary::Channels {
        inputs: model.inputs(),
        outputs: model.outputs(),
        faults: model.faults(),
    };
    plan.validate(ch)?;
    Ok(Prepared {
        hash: config.hash(),
        config: config.clone(),
        plant,
        controller,
        detector,
        noise,
        loop_system,
        plan,
        synthesis,
        x0,
        operating_point,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpactSummary {
    /// Largest `‖x_k‖∞` over the run (deviation coordinates).
    pub max_deviation: f64,
    pub final_state: Vec<f64>,
    pub min_physical: Vec<f64>,
    pub max_physical: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub name: String,
    pub scenario: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub horizon: usize,
    pub sample_time: f64,
    pub attack_start: usize,
    pub exit_code: i32,
    pub first_alarm: Option<usize>,
    pub first_unsafe: Option<usize>,
    pub first_saturation: Option<usize>,
    pub alarm_count: usize,
    pub unsafe_before_alarm: bool,
    pub stealth: StealthReport,
    pub impact: ImpactSummary,
    pub synthesis: SynthesisInfo,
    pub policy: PolicyStats,
    pub noise: NoiseSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<Vec<f64>>,
}

pub struct Outcome {
    pub trace: Trace,
    pub summary: Summary,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

/// 0 ran clean, 2 alarm, 3 safety violated, 4 both.
pub fn outcome_code(alarm: bool, unsafe_state: bool) -> i32 {
    match (alarm, unsafe_state) {
        (false, false) => 0,
        (true, false) => 2,
        (false, true) => 3,
        (true, true) => 4,
    }
}

impl Prepared {
    fn sim_config(&self, seed: u64) -> SimConfig {
        let mut sc = SimConfig::new(self.config.horizon, seed).with_noise(self.noise.clone());
        sc.safe_set = Some(self.config.safe_set.clone());
        sc.x0 = self.x0.clone();
        sc
    }

    fn plan_for_seed(&self, seed: u64) -> AttackPlan {
        let mut plan = self.plan.clone();
        if let (PlanKind::Dos(p), AttackConfig::Dos { seed: None, .. }) = (&mut plan.kind, &self.config.attack) {
            p.seed = derived_seed(seed);
        }
        plan
    }

    /// Attacked run plus the nominal run with the same noise.
    pub fn run(&self, seed: u64) -> Result<Outcome> {
        let sc = self.sim_config(seed);
        let plan = self.plan_for_seed(seed);
        let mut trace = simulate_loop(self.plant.as_ref(), &self.controller, &self.detector, &plan, &sc)?;
        trace.header.config_hash = Some(self.hash.clone());
        let nominal_cfg = SimConfig { x0: None, ..sc };
        let nominal = simulate_loop(self.plant.as_ref(), &self.controller, &self.detector, &AttackPlan::none(), &nominal_cfg)?;
        let response: Vec<DVector<f64>> = trace.steps.iter().zip(&nominal.steps).map(|(a, b)| &a.r - &b.r).collect();
        let start = plan.start();
        let stealth = classify_trace(&trace.residuals(), Some(&response), &self.detector, (start, trace.len()));

        let n = trace.header.states;
        let mut min_p = vec![f64::INFINITY; n];
        let mut max_p = vec![f64::NEG_INFINITY; n];
        let mut max_dev = 0.0f64;
        for s in &trace.steps {
            let ph = self.plant.physical(&s.x);
            for i in 0..n {
                min_p[i] = min_p[i].min(ph[i]);
                max_p[i] = max_p[i].max(ph[i]);
            }
            max_dev = max_dev.max(s.x.amax());
        }
        let (first_alarm, first_unsafe) = (trace.first_alarm(), trace.first_unsafe());
        let summary = Summary {
            schema: SUMMARY_SCHEMA,
            name: self.config.name.clone(),
            scenario: plan.scenario(),
            seed,
            config_hash: self.hash.clone(),
            horizon: self.config.horizon,
            sample_time: trace.header.sample_time,
            attack_start: start,
            exit_code: outcome_code(first_alarm.is_some(), first_unsafe.is_some()),
            first_alarm,
            first_unsafe,
            first_saturation: trace.first_saturation(),
            alarm_count: trace.steps.iter().filter(|s| s.alarm).count(),
            unsafe_before_alarm: match (first_unsafe, first_alarm) {
                (Some(u), Some(a)) => u < a,
                (Some(_), None) => true,
                _ => false,
            },
            stealth,
            impact: ImpactSummary {
                max_deviation: max_dev,
                final_state: trace.steps.last().map(|s| s.x.iter().cloned().collect()).unwrap_or_default(),
                min_physical: min_p,
                max_physical: max_p,
            },
            synthesis: self.synthesis.clone(),
            policy: trace.stats,
            noise: self.noise.clone(),
            operating_point: self.operating_point.clone(),
        };
        Ok(Outcome { trace, summary })
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Outcome> {
    prepare(config)?.run(config.seed)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// CSV with a `#`-prefixed schema line, then a header row:
/// `k, x…, z…, u…, utilde…, y…, ytilde…, r…, alarm, safe`.
pub fn write_trace_csv<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    let h = &trace.header;
    writeln!(
        out,
        "# {TRACE_SCHEMA} seed={} config={} sample_time={}",
        h.seed,
        h.config_hash.as_deref().unwrap_or("-"),
        h.sample_time
    )?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    for (prefix, count) in [
        ("x", h.states),
        ("z", h.controller_states),
        ("u", h.inputs),
        ("utilde", h.inputs),
        ("y", h.outputs),
        ("ytilde", h.outputs),
        ("r", h.residues),
    ] {
        header.extend((1..=count).map(|i| format!("{prefix}{i}")));
    }
    header.push("alarm".into());
    header.push("safe".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for s in &trace.steps {
        row.clear();
        row.push(s.k.to_string());
        for v in [&s.x, &s.z, &s.u, &s.utilde, &s.y, &s.ytilde, &s.r] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        row.push(u8::from(s.alarm).to_string());
        row.push(u8::from(s.safe).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outputs(outcome: &Outcome, trace_path: &Path, summary_path: &Path) -> Result<()> {
    for p in [trace_path, summary_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    let file = std::io::BufWriter::new(std::fs::File::create(trace_path)?);
    write_trace_csv(&outcome.trace, file)?;
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    std::fs::write(summary_path, json + "\n")?;
    Ok(())
}

/// Re-checks the bias of a prepared bias scenario with `a∞` multiplied by `scale`.
pub fn bias_certificate(p: &Prepared, scale: f64, horizon: Option<usize>, tol: f64) -> Result<StealthCertificate> {
    let PlanKind::Bias(plan) = &p.plan.kind else {
        return Err(Error::ConfigInvalid("not a bias scenario".into()));
    };
    let a = DVector::from_column_slice(&plan.a_infinity) * scale;
    let auto = build_bias_autonomous(&p.loop_system, &a, plan.beta)?;
    Ok(verify_alpha_stealthy(&auto, p.detector.delta_alpha, horizon, tol))
}

/// Steady-state gains of a prepared loop, for reporting.
pub fn gains(p: &Prepared) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    steady_state_gains(&p.loop_system)
}
