//! Built-in scenarios.

use super::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("qtp-dos", include_str!("../../presets/qtp-dos.toml")),
    ("qtp-replay", include_str!("../../presets/qtp-replay.toml")),
    ("qtp-zero", include_str!("../../presets/qtp-zero.toml")),
    ("qtp-bias", include_str!("../../presets/qtp-bias.toml")),
    ("two-state-zero", include_str!("../../presets/two-state-zero.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let src = preset_source(name).ok_or_else(|| {
        let known: Vec<_> = preset_names().collect();
        Error::ConfigInvalid(format!("unknown preset {name:?}; known: {}", known.join(", ")))
    })?;
    ScenarioConfig::from_toml(src)
}
