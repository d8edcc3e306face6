use std::io::Write;
use std::path::Path;

use ortho_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Deterministic part of every JSON report.
#[derive(Serialize)]
pub struct Body<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: Value,
    pub result: Value,
}

/// `{"report": body, "wall_time_ms", "threads"}`; only `report` is
/// reproducible across runs.
pub fn envelope(body: &Body, wall_time_ms: u128, threads: usize) -> String {
    let v = json!({
        "report": body,
        "wall_time_ms": wall_time_ms,
        "threads": threads,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_out(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

pub struct Failure {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
    pub details: Option<Value>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: "input", message: message.into(), exit: EXIT_INPUT, details: None }
    }

    pub fn to_json(&self) -> String {
        let mut err = json!({ "code": self.code, "message": self.message });
        if let Some(d) = &self.details {
            err["details"] = d.clone();
        }
        let mut s = serde_json::to_string_pretty(&json!({ "error": err })).expect("error serializes");
        s.push('\n');
        s
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_INPUT };
        let details = match &e {
            Error::BudgetExhausted(report) => serde_json::to_value(report).ok(),
            Error::ExistenceSearchFailed { best: Some(best), .. } => serde_json::to_value(best).ok(),
            Error::NoConvergence { best, .. } => serde_json::to_value(best).ok(),
            _ => None,
        };
        Self { code: e.code(), message: e.to_string(), exit, details }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}
