//! Front end for `hg`: reads a run manifest, dispatches to the analysis,
//! writes the CSV and a JSON summary (schema `hg-run-v1`).

pub mod commands;
pub mod manifest;

use std::collections::BTreeMap;
use std::time::Instant;

use hg_core::HgError;
use serde::Serialize;
use serde_json::{json, Value};

pub use manifest::{Command, RunManifest};

pub const SCHEMA: &str = "hg-run-v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] HgError),
}

impl CliError {
    /// 2 for invalid input, 3 for quadrature failures, 4 past the
    /// existence window.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(HgError::QuadratureFailure(_)) => 3,
            CliError::Core(HgError::BeyondMaximalTime { .. } | HgError::AtMaximalTime { .. }) => 4,
            _ => 2,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Validation(_) => "Validation".into(),
            // The variant name, without its fields.
            CliError::Core(e) => format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("Core").to_string(),
        }
    }

    /// The object written to stderr on failure.
    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub command: Command,
    pub manifest: RunManifest,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub rows: usize,
    pub quadrature_nodes: BTreeMap<String, usize>,
    pub output: String,
    pub result: Value,
}

/// Runs a manifest whose paths are already resolved and writes both
/// artifacts.
pub fn run(manifest: &RunManifest) -> Result<Summary, CliError> {
    manifest.validate()?;
    let start = Instant::now();
    let art = commands::dispatch(manifest)?;
    std::fs::write(&manifest.output, &art.csv).map_err(HgError::from)?;
    let summary = Summary {
        schema: SCHEMA,
        command: manifest.command,
        manifest: manifest.clone(),
        versions: BTreeMap::from([("hg-core", hg_core::VERSION), ("hg-cli", env!("CARGO_PKG_VERSION"))]),
        seed: manifest.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        rows: art.rows,
        quadrature_nodes: art.nodes,
        output: manifest.output.display().to_string(),
        result: art.result,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Validation(format!("summary: {e}")))?;
    std::fs::write(manifest.summary_path(), text + "\n").map_err(HgError::from)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(HgError::QuadratureFailure("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(HgError::BeyondMaximalTime { t: 2.0, t_max: 1.0 }).exit_code(), 4);
        assert_eq!(CliError::Core(HgError::InvalidSpec("x".into())).exit_code(), 2);
    }

    #[test]
    fn error_kind_is_the_variant_name() {
        assert_eq!(CliError::Core(HgError::BeyondMaximalTime { t: 2.0, t_max: 1.0 }).kind(), "BeyondMaximalTime");
        assert_eq!(CliError::Core(HgError::SignedDataUnsupported).kind(), "SignedDataUnsupported");
        assert_eq!(CliError::Core(HgError::Parse("bad".into())).kind(), "Parse");
    }
}
