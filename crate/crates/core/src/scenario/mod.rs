//! Scenario files, presets, and the runner that turns a config into a trace,
//! a summary and an exit code.

mod config;
mod presets;
mod run;

pub use config::{
    AttackConfig, Calibration, ControllerSource, Dynamics, NoiseConfig, OutputConfig, PartitionConfig, Phase,
    PlantSource, QtpOverrides, ResourceConfig, ScenarioConfig, Thresholds,
};
pub use presets::{preset, preset_names, preset_source, PRESETS};
pub use run::{
    bias_certificate, gains, outcome_code, prepare, run_scenario, write_outputs, write_trace_csv, CertificateInfo, ImpactSummary,
    Outcome, Prepared, Summary, SynthesisInfo, SUMMARY_SCHEMA, TRACE_SCHEMA,
};
