//! Flat JSON configuration with dotted keys, defaults, and `--key value` overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Command {
    Score,
    ActiveRound,
    Strategies,
    DequantCheck,
    Certify,
    ComplexityTable,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::ActiveRound => "active-round",
            Command::Strategies => "strategies",
            Command::DequantCheck => "dequant-check",
            Command::Certify => "certify",
            Command::ComplexityTable => "complexity-table",
        }
    }
}

/// Keys that name output locations; they are not echoed, so reports do not depend on where they go.
pub const OUTPUT_KEYS: [&str; 2] = ["output_path", "csv_path"];

/// Every accepted key with its default. `null` means unset.
pub fn defaults() -> BTreeMap<&'static str, Value> {
    BTreeMap::from([
        ("seed", Value::Null),
        ("output_path", Value::Null),
        ("csv_path", Value::Null),
        ("dataset.path", Value::Null),
        ("dataset.tau", json!(0.8)),
        ("dataset.manifold.kind", json!("parallel-segments")),
        ("dataset.manifold.k", json!(1)),
        ("dataset.manifold.m", json!(2)),
        ("dataset.manifold.r_p", json!(1.0)),
        ("dataset.manifold.samples_per_class", json!(200)),
        ("dataset.manifold.seed", Value::Null),
        ("backend.kind", json!("exact")),
        ("backend.qsim.kappa_eff", Value::Null),
        ("backend.qsim.eig_bits", json!(24)),
        ("backend.qsim.ae.j", json!(4096)),
        ("backend.qsim.ae.k", json!(1)),
        ("backend.qsim.ae.beta", json!(1)),
        ("backend.qsim.ae.mode", json!("grid")),
        ("backend.dequant.sigma_ratio", json!(1e-3)),
        ("backend.dequant.fkv_epsilon", Value::Null),
        ("backend.dequant.delta", json!(0.01)),
        ("backend.dequant.tolerance", json!(0.01)),
        ("backend.dequant.max_samples", json!(1_000_000_000_000u64)),
        ("svm.gamma", json!(1e6)),
        ("svm.kernel.kind", json!("linear")),
        ("svm.kernel.order", json!(2)),
        ("svm.kernel.width", json!(1.0)),
        ("svm.activation.kind", json!("linear-clip")),
        ("svm.activation.scale", json!(4.0)),
        ("svm.fixed_class", Value::Null),
        ("x", Value::Null),
        ("candidates.pool", Value::Null),
        ("C", json!(2.0)),
        ("beta", json!(3.0)),
        ("epsilon", json!(0.2)),
        ("sigma", json!(0.0)),
        ("strategies.names", Value::Null),
        ("strategies.pool", Value::Null),
        ("strategies.pool_size", json!(4096)),
        ("strategies.trials", json!(1)),
        ("strategies.m_max", json!(1_000_000)),
        ("dequant_check.tolerance", json!(0.05)),
        ("robustness.delta", json!(0.5)),
        ("robustness.epsilon0", json!(0.2)),
        ("robustness.trials", json!(10_000)),
        ("robustness.norm", json!("2")),
        ("robustness.method", json!("greedy-coverage")),
        ("complexity.trials", json!(200)),
    ])
}

/// The resolved configuration: defaults, then the file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    values: BTreeMap<String, Value>,
}

fn parse_flag_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits `--key value` and `--key=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let Some(flag) = args[i].strip_prefix("--") else {
            return Err(Error::invalid(format!("expected --key value, got {:?}", args[i])));
        };
        if let Some((k, v)) = flag.split_once('=') {
            out.push((k.to_string(), parse_flag_value(v)));
            i += 1;
        } else {
            let v = args.get(i + 1).ok_or_else(|| Error::invalid(format!("missing value for --{flag}")))?;
            out.push((flag.to_string(), parse_flag_value(v)));
            i += 2;
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Resolves `file` (a flat JSON object) and `overrides` over the defaults.
    pub fn resolve(command: Command, file: Option<&Value>, overrides: &[(String, Value)]) -> Result<Self> {
        let known = defaults();
        let mut values: BTreeMap<String, Value> = known.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let mut set = |key: &str, value: &Value| -> Result<()> {
            if !known.contains_key(key) {
                return Err(Error::invalid(format!("unknown config key {key:?}")));
            }
            values.insert(key.to_string(), value.clone());
            Ok(())
        };
        if let Some(file) = file {
            let obj = file.as_object().ok_or_else(|| Error::invalid("config file must be a JSON object"))?;
            for (k, v) in obj {
                if k == "command" {
                    if v.as_str() != Some(command.name()) {
                        return Err(Error::invalid(format!("config file is for command {v}, not {:?}", command.name())));
                    }
                    continue;
                }
                set(k, v)?;
            }
        }
        for (k, v) in overrides {
            set(k, v)?;
        }
        let cfg = ExperimentConfig { command, values };
        cfg.u64("seed").map_err(|_| Error::invalid("missing or invalid \"seed\": a non-negative integer is required"))?;
        Ok(cfg)
    }

    pub fn load(command: Command, path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read config {}: {e}", p.display())))?;
                Some(serde_json::from_str::<Value>(&text).map_err(|e| Error::invalid(format!("config {} is not JSON: {e}", p.display())))?)
            }
            None => None,
        };
        Self::resolve(command, file.as_ref(), overrides)
    }

    /// The configuration echoed into reports: every key except the output locations.
    pub fn echo(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.values {
            if !OUTPUT_KEYS.contains(&k.as_str()) {
                map.insert(k.clone(), v.clone());
            }
        }
        Value::Object(map)
    }

    pub fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or(&Value::Null)
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.get(key).is_null()
    }

    fn mismatch(key: &str, want: &str, got: &Value) -> Error {
        Error::invalid(format!("config key {key:?} must be {want}, got {got}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        v.as_f64().ok_or_else(|| Self::mismatch(key, "a number", v))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.is_set(key) {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        if let Some(u) = v.as_u64() {
            return Ok(u);
        }
        // Accept integral floats such as 1e12.
        match v.as_f64() {
            Some(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
            _ => Err(Self::mismatch(key, "a non-negative integer", v)),
        }
    }

    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>> {
        if self.is_set(key) {
            self.u64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn string(&self, key: &str) -> Result<&str> {
        let v = self.get(key);
        v.as_str().ok_or_else(|| Self::mismatch(key, "a string", v))
    }

    pub fn opt_string(&self, key: &str) -> Result<Option<&str>> {
        if self.is_set(key) {
            self.string(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn vector(&self, key: &str) -> Result<Vec<f64>> {
        serde_json::from_value(self.get(key).clone()).map_err(|_| Self::mismatch(key, "an array of numbers", self.get(key)))
    }

    pub fn points(&self, key: &str) -> Result<Vec<Vec<f64>>> {
        serde_json::from_value(self.get(key).clone()).map_err(|_| Self::mismatch(key, "an array of points", self.get(key)))
    }

    /// Parses a string key as a kebab-case enum through serde.
    pub fn enum_value<T: serde::de::DeserializeOwned>(&self, key: &str, what: &str) -> Result<T> {
        serde_json::from_value(self.get(key).clone()).map_err(|_| Self::mismatch(key, what, self.get(key)))
    }
}
