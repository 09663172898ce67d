//! Scenarios shipped with the binary.

use crate::config::{ConfigError, ScenarioConfig};

pub const BUILTIN: [(&str, &str); 4] = [
    ("museum", include_str!("../scenarios/museum.toml")),
    ("university", include_str!("../scenarios/university.toml")),
    ("fork-attack", include_str!("../scenarios/fork-attack.toml")),
    ("revocation", include_str!("../scenarios/revocation.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = source(name).ok_or_else(|| ConfigError::Invalid {
        field: "scenario".into(),
        message: format!("no built-in scenario {name:?} (try {})", names().collect::<Vec<_>>().join(", ")),
    })?;
    ScenarioConfig::from_toml(text)
}
