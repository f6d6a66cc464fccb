//! TOML scenario schema. Channel and state indices in the file are 1-based.

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{BiasNorm, PhysicalSignal};
use crate::error::{Error, Result};
use crate::numerics::ZeroChoice;
use crate::safety::SafeSet;
use crate::sim::{LqgSpec, QtpParams};
use crate::system::AttackResources;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub horizon: usize,
    pub seed: u64,
    pub plant: PlantSource,
    pub controller: ControllerSource,
    pub detector: Thresholds,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub safe_set: SafeSet,
    pub attack: AttackConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Minimum,
    NonMinimum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    #[default]
    Nonlinear,
    Linearized,
}

/// Overrides on the default tank parameter set of the chosen phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtpOverrides {
    pub area: Option<[f64; 4]>,
    pub outlet: Option<[f64; 4]>,
    pub pump_gain: Option<[f64; 2]>,
    pub gamma: Option<[f64; 2]>,
    pub gravity: Option<f64>,
    pub level_max: Option<f64>,
    pub input_max: Option<f64>,
    pub substeps: Option<usize>,
}

impl QtpOverrides {
    pub fn apply(&self, phase: Phase) -> QtpParams {
        let mut p = match phase {
            Phase::Minimum => QtpParams::minimum_phase(),
            Phase::NonMinimum => QtpParams::non_minimum_phase(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(area, outlet, pump_gain, gamma, gravity, level_max, input_max, substeps);
        p
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSource {
    /// Discrete-time matrices, row-major.
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        #[serde(default)]
        g: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        f: Option<Vec<Vec<f64>>>,
        #[serde(default = "one")]
        sample_time: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    Qtp {
        phase: Phase,
        operating_input: [f64; 2],
        #[serde(default = "one")]
        sample_time: f64,
        #[serde(default)]
        dynamics: Dynamics,
        #[serde(default)]
        params: QtpOverrides,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControllerSource {
    Lqg(LqgSpec),
    /// Explicit controller and detector gain; `v` defaults to the identity.
    Explicit {
        ac: Vec<Vec<f64>>,
        bc: Vec<Vec<f64>>,
        cc: Vec<Vec<f64>>,
        dc: Vec<Vec<f64>>,
        k: Vec<Vec<f64>>,
        #[serde(default)]
        v: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub delta_r: f64,
    pub delta_alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub process_std: Vec<f64>,
    #[serde(default)]
    pub measurement_std: Vec<f64>,
    /// Rescale the stds so a nominal residual quantile hits a target.
    #[serde(default)]
    pub calibrate: Option<Calibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub target: f64,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_calibration_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_quantile() -> f64 {
    0.99
}

fn default_calibration_steps() -> usize {
    5000
}

/// 1-based channel lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceConfig {
    #[serde(default)]
    pub disclosure_u: Vec<usize>,
    #[serde(default)]
    pub disclosure_y: Vec<usize>,
    #[serde(default)]
    pub decept_u: Vec<usize>,
    #[serde(default)]
    pub decept_y: Vec<usize>,
    #[serde(default)]
    pub dos_u: Vec<usize>,
    #[serde(default)]
    pub dos_y: Vec<usize>,
    #[serde(default)]
    pub physical: Vec<usize>,
}

pub(crate) fn zero_based(list: &[usize], what: &str) -> Result<Vec<usize>> {
    list.iter()
        .map(|&c| {
            c.checked_sub(1)
                .ok_or_else(|| Error::ConfigInvalid(format!("{what}: indices are 1-based, got 0")))
        })
        .collect()
}

impl ResourceConfig {
    pub fn to_resources(&self) -> Result<AttackResources> {
        Ok(AttackResources {
            disclosure_u: zero_based(&self.disclosure_u, "disclosure_u")?,
            disclosure_y: zero_based(&self.disclosure_y, "disclosure_y")?,
            decept_u: zero_based(&self.decept_u, "decept_u")?,
            decept_y: zero_based(&self.decept_y, "decept_y")?,
            dos_u: zero_based(&self.dos_u, "dos_u")?,
            dos_y: zero_based(&self.dos_y, "dos_y")?,
            physical: zero_based(&self.physical, "physical")?,
        })
    }
}

/// 1-based states, inputs and outputs the local adversary knows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttackConfig {
    None {
        #[serde(default)]
        resources: ResourceConfig,
    },
    Dos {
        resources: ResourceConfig,
        p: f64,
        k0: usize,
        #[serde(default)]
        stop: Option<usize>,
        /// Blocking RNG seed; derived from the run seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Replay {
        resources: ResourceConfig,
        k0: usize,
        kr: usize,
        kf: usize,
        #[serde(default)]
        physical: Option<PhysicalSignal>,
    },
    Zero {
        resources: ResourceConfig,
        #[serde(default)]
        choice: ZeroChoice,
        #[serde(default = "default_scale")]
        scale: f64,
        k0: usize,
        #[serde(default)]
        stop: Option<usize>,
        /// Start the plant at the scaled zero direction (needs `k0 = 0`).
        #[serde(default)]
        match_initial_state: bool,
    },
    LocalZero {
        resources: ResourceConfig,
        partition: PartitionConfig,
        #[serde(default)]
        choice: ZeroChoice,
        #[serde(default = "default_scale")]
        scale: f64,
        k0: usize,
        #[serde(default)]
        stop: Option<usize>,
        #[serde(default)]
        match_initial_state: bool,
    },
    Bias {
        resources: ResourceConfig,
        norm: BiasNorm,
        beta: f64,
        k0: usize,
        /// Explicit `a∞` on `[f; bᵘ; bʸ]`; synthesized when absent.
        #[serde(default)]
        a_infinity: Option<Vec<f64>>,
        /// Multiplies the synthesized or explicit `a∞`.
        #[serde(default = "default_scale")]
        scale: f64,
        /// Annotation only, reported in the summary.
        #[serde(default)]
        reference_a_infinity: Option<Vec<f64>>,
    },
}

impl AttackConfig {
    pub fn resources(&self) -> &ResourceConfig {
        match self {
            AttackConfig::None { resources }
            | AttackConfig::Dos { resources, .. }
            | AttackConfig::Replay { resources, .. }
            | AttackConfig::Zero { resources, .. }
            | AttackConfig::LocalZero { resources, .. }
            | AttackConfig::Bias { resources, .. } => resources,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// sha256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        let t = self.detector;
        if !(t.delta_r >= 0.0 && t.delta_alpha >= 0.0) {
            return bad("thresholds must be nonnegative");
        }
        if let AttackConfig::Zero { match_initial_state: true, k0, .. }
        | AttackConfig::LocalZero { match_initial_state: true, k0, .. } = &self.attack
        {
            if *k0 != 0 {
                return bad("match_initial_state needs k0 = 0");
            }
        }
        Ok(())
    }
}

/// Row-major nested array with a required shape.
pub(crate) fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ConfigInvalid(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Columns of a nested array whose row count is known.
pub(crate) fn width(rows: &[Vec<f64>]) -> usize {
    rows.first().map_or(0, |r| r.len())
}
