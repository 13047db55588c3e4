//! Report assembly. Keys are sorted and floats use the shortest round-trip form.

use serde_json::{json, Value};

use super::config::{Command, ExperimentConfig};
use crate::error::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_FAILURE
    }
}

fn header(command: Command, config: Option<&ExperimentConfig>) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "version": VERSION,
        "command": command.name(),
        "config": config.map_or(Value::Null, ExperimentConfig::echo),
    })
}

pub fn success(config: &ExperimentConfig, result: Value) -> Value {
    let mut r = header(config.command, Some(config));
    r["result"] = result;
    r
}

pub fn failure(command: Command, config: Option<&ExperimentConfig>, err: &Error) -> Value {
    let mut r = header(command, config);
    r["error"] = json!({
        "kind": if err.is_validation() { "validation" } else { "runtime" },
        "message": err.to_string(),
    });
    r
}

pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports are plain JSON values");
    s.push('\n');
    s
}
