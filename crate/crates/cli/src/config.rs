use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Everything a run depends on. Written out as `key=value` lines, it replays
/// the run exactly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub k: Option<u32>,
    pub inputs: Option<String>,
    pub schedule: Option<PathBuf>,
    pub exhaustive: bool,
    pub random: Option<u64>,
    pub runs: Option<u64>,
    pub crashes: Option<usize>,
    pub task: Option<PathBuf>,
    pub budget: Option<u64>,
    pub n: Option<usize>,
    pub rounds: Option<u32>,
    pub mode: Option<String>,
    pub simulate_1bit: bool,
    pub delta: Option<u32>,
    pub count_executions: bool,
    pub check_agreement: Option<String>,
    pub t: Option<usize>,
    pub crash: Option<String>,
    pub send: Option<String>,
    pub seed: Option<u64>,
    pub protocol: Option<String>,
    pub eps: Option<String>,
    pub max_steps: Option<usize>,
    pub jsonl: Option<PathBuf>,
    pub dot: Option<PathBuf>,
}

fn to_map(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

impl RunConfig {
    /// Apply `key=value` lines; `#` starts a comment.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key=value", no + 1)));
            };
            self.set(key.trim().replace('-', "_").as_str(), value.trim())
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let mut map = to_map(self);
        if !map.contains_key(key) {
            return Err(format!("unknown key {key:?}"));
        }
        let guesses = [
            serde_json::from_str::<Value>(value).ok().filter(|v| v.is_boolean() || v.is_number()),
            Some(Value::String(value.to_string())),
            (value.is_empty() || value == "none").then_some(Value::Null),
        ];
        for guess in guesses.into_iter().flatten() {
            map.insert(key.to_string(), guess);
            if let Ok(cfg) = serde_json::from_value::<RunConfig>(Value::Object(map.clone())) {
                *self = cfg;
                return Ok(());
            }
        }
        Err(format!("bad value {value:?} for {key}"))
    }

    /// Non-default settings as `key=value` lines, sorted by key.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (key, value) in to_map(self) {
            match value {
                Value::Null | Value::Bool(false) => {}
                Value::String(s) => {
                    let _ = writeln!(out, "{key}={s}");
                }
                other => {
                    let _ = writeln!(out, "{key}={other}");
                }
            }
        }
        out
    }

    #[cfg(test)]
    pub fn from_kv(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(text)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            command: "epsagree".into(),
            k: Some(4),
            inputs: Some("0,1".into()),
            exhaustive: true,
            eps: Some("1/9".into()),
            ..Default::default()
        };
        let text = cfg.to_kv();
        assert_eq!(RunConfig::from_kv(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_and_errors() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides("k = 3\n# comment\nsimulate-1bit=true\ninputs=0\n").unwrap();
        assert_eq!(cfg.k, Some(3));
        assert!(cfg.simulate_1bit);
        assert_eq!(cfg.inputs.as_deref(), Some("0"));
        assert!(cfg.apply_overrides("nope=1").is_err());
        assert!(cfg.apply_overrides("k=abc").is_err());
        assert!(cfg.apply_overrides("just words").is_err());
        cfg.apply_overrides("k=none").unwrap();
        assert_eq!(cfg.k, None);
    }
}
