use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eval,
    Sim,
    Verify,
    Report,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One run of the tool. Every command line is first turned into one of these, so a run
/// can be replayed from its JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig { command, params: BTreeMap::new(), seed: DEFAULT_SEED, output_path: None, format: Format::Csv }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Errors on any parameter outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown parameter '{k}' for {:?}; allowed: {}",
                    self.command,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn str_param(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(CliError::Usage(format!("parameter '{key}' must be a string, got {v}"))),
        }
    }

    pub fn strings(&self, key: &str) -> Result<Vec<String>, CliError> {
        match self.params.get(key) {
            None => Ok(Vec::new()),
            Some(Value::String(s)) => Ok(vec![s.clone()]),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(CliError::Usage(format!("parameter '{key}' must hold strings, got {v}"))),
                })
                .collect(),
            Some(v) => Err(CliError::Usage(format!("parameter '{key}' must be a list of strings, got {v}"))),
        }
    }

    /// A number or a list of numbers.
    pub fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let bad = |v: &Value| CliError::Usage(format!("parameter '{key}' must be a number or list of numbers, got {v}"));
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(Some(vec![n.as_f64().ok_or_else(|| bad(&Value::Number(n.clone())))?])),
            Some(Value::Array(a)) if !a.is_empty() => {
                a.iter().map(|v| v.as_f64().ok_or_else(|| bad(v))).collect::<Result<Vec<_>, _>>().map(Some)
            }
            Some(v) => Err(bad(v)),
        }
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.numbers(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(CliError::Usage(format!("parameter '{key}' takes a single number"))),
        }
    }

    pub fn count(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.number(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 9e15 => Ok(Some(v as u64)),
            Some(v) => Err(CliError::Usage(format!("parameter '{key}' must be a nonnegative integer, got {v}"))),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.params.get(key) {
            None => Ok(false),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(CliError::Usage(format!("parameter '{key}' must be true or false, got {v}"))),
        }
    }
}

/// Parses `"1"`, `"0.5,1,2"` or `"lo:hi:n"` (n evenly spaced points, ends included).
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--{key}: cannot parse '{s}' as a number, list or lo:hi:n range"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![lo]),
            _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

pub fn numbers_value(v: &[f64]) -> Value {
    if v.len() == 1 {
        Value::from(v[0])
    } else {
        Value::from(v.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn run_config_round_trips(xs in proptest::collection::vec(-1e300f64..1e300, 1..5), seed in any::<u64>(), json in any::<bool>()) {
            let mut c = RunConfig::new(Command::Sim);
            c.seed = seed;
            c.format = if json { Format::Json } else { Format::Csv };
            c.params.insert("times".into(), numbers_value(&xs));
            c.params.insert("scenario".into(), Value::String("survival".into()));
            let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.numbers("times").unwrap().unwrap(), xs);
        }

        #[test]
        fn ranges_hit_both_ends(lo in -10.0f64..10.0, span in 0.1f64..10.0, n in 2usize..50) {
            let v = parse_list("t", &format!("{lo}:{}:{n}", lo + span)).unwrap();
            prop_assert_eq!(v.len(), n);
            prop_assert_eq!(v[0], lo);
            prop_assert!((v[n - 1] - (lo + span)).abs() <= 1e-12 * (1.0 + lo.abs() + span));
        }
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"command": "eval", "extra": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"command": "verify"}"#).unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(parse_list("x", "1:2:0").is_err());
        assert_eq!(parse_list("x", "1, 2.5").unwrap(), vec![1.0, 2.5]);
    }
}
