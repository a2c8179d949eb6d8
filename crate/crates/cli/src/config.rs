//! Flat `section.key = value` run configuration.
//!
//! Every key has a default (see `expheat defaults`). Lines starting with `#`
//! are comments. Unknown keys, repeated keys and values of the wrong type are
//! rejected.

use crate::error::CliError;
use expheat_core::heat::HeatConfig;
use expheat_core::inner::EtaConfig;
use expheat_core::shooting::{ProfileConfig, ShootConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eta: EtaConfig,
    pub shoot: ShootConfig,
    pub profile: ProfileConfig,
    pub heat: HeatConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eta: EtaConfig::default(),
            shoot: ShootConfig::default(),
            profile: ProfileConfig::default(),
            heat: HeatConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

const SECTIONS: [&str; 4] = ["eta", "shoot", "profile", "heat"];

fn tree(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serialises") {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

/// Parses `text` as a value of the same JSON kind as `default`.
fn typed(key: &str, text: &str, default: &Value, nullable: bool) -> Result<Value, CliError> {
    let bad = || CliError::Usage(format!("{key}: cannot parse {text:?}"));
    if nullable && text.eq_ignore_ascii_case("none") {
        return Ok(Value::Null);
    }
    match default {
        Value::Number(n) if n.is_u64() => text.parse::<u64>().map(Value::from).map_err(|_| bad()),
        Value::Number(_) | Value::Null => {
            let x: f64 = text.parse().map_err(|_| bad())?;
            Number::from_f64(x).map(Value::Number).ok_or_else(bad)
        }
        Value::String(_) => Ok(Value::String(text.to_string())),
        _ => Err(bad()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut root = tree(&RunConfig::default());
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Usage(format!("line {}: repeated key {key}", no + 1)));
            }
            let unknown = || CliError::Usage(format!("line {}: unknown key {key}", no + 1));
            if key == "out_dir" {
                root.insert(key.into(), Value::String(value.into()));
                continue;
            }
            let (section, field) = key.split_once('.').ok_or_else(unknown)?;
            let slot = match root.get_mut(section) {
                Some(Value::Object(m)) if SECTIONS.contains(&section) => m.get_mut(field).ok_or_else(unknown)?,
                _ => return Err(unknown()),
            };
            let nullable = section == "heat" && field == "t_max";
            *slot = typed(key, value, slot, nullable)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(root)).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.eta.validate()?;
        self.shoot.validate()?;
        self.profile.validate()?;
        self.heat.validate()?;
        Ok(())
    }

    /// Flat `key -> value` listing, in the file syntax.
    pub fn flat(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (section, body) in tree(self) {
            match body {
                Value::Object(m) => {
                    for (k, v) in m {
                        let text = match v {
                            Value::Null => "none".to_string(),
                            Value::Number(n) => match n.as_f64() {
                                Some(x) if !n.is_u64() => format!("{x:?}"),
                                _ => n.to_string(),
                            },
                            other => other.to_string(),
                        };
                        out.insert(format!("{section}.{k}"), text);
                    }
                }
                Value::String(s) => {
                    out.insert(section, s);
                }
                _ => {}
            }
        }
        out
    }

    pub fn to_file_text(&self) -> String {
        self.flat().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_file_text()).unwrap(), d);
        assert_eq!(RunConfig::parse("").unwrap(), d);
    }

    #[test]
    fn values_are_typed() {
        let c = RunConfig::parse("# comment\neta.lambda = 150\nheat.t_max = 1e-5\nheat.duhamel_nodes=6\n").unwrap();
        assert_eq!(c.eta.lambda, 150.0);
        assert_eq!(c.heat.t_max, Some(1e-5));
        assert_eq!(c.heat.duhamel_nodes, 6);
        assert!(RunConfig::parse("heat.duhamel_nodes = 2.5").is_err());
        assert!(RunConfig::parse("eta.lambda = fast").is_err());
    }

    #[test]
    fn unknown_and_repeated_keys_fail() {
        for text in ["eta.lambdaa = 3", "nosection = 1", "heat = 1", "eta.lambda = 100\neta.lambda = 120", "eta.lambda"] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(RunConfig::parse("eta.lambda = 1").is_err());
        assert!(RunConfig::parse("heat.t_floor = -1").is_err());
    }
}
