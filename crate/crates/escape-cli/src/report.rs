//! Report emission. JSON is the authoritative output: every run writes one
//! report object `{schema_version, command, units, config, result}` where
//! `config` is the fully resolved [`RunConfig`] — re-running it reproduces
//! the report bit for bit. CSV files are numeric side-channels with fixed,
//! documented columns for downstream plotting.
//!
//! Lengths are in the ambient embedding unit L; times are in L² because the
//! particle generator is the full Laplacian (halve all times for the Δ/2
//! convention). Asymptotic values carry their remainder-order tag, Monte
//! Carlo values their time-step bias order.

use std::fs;
use std::io::Write;

use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::{CliError, CliResult};

/// Units shared by every numeric output.
#[derive(Debug, Clone, Serialize)]
pub struct Units {
    pub length: &'static str,
    pub time: &'static str,
}

pub fn units() -> Units {
    Units {
        length: "L (ambient embedding unit)",
        time: "L^2 (Brownian generator = full Laplacian)",
    }
}

/// The one JSON document a run emits.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub units: Units,
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &'static str, config: RunConfig, result: T) -> Self {
        Report { schema_version: SCHEMA_VERSION, command, units: units(), config, result }
    }

    /// Serializes the report and routes it to `config.output.json`
    /// ("-" = stdout).
    pub fn write(&self) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("report serialization: {e}")))?;
        text.push('\n');
        if self.config.output.json == "-" {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        } else {
            fs::write(&self.config.output.json, text)
                .map_err(|e| CliError::Io(format!("{}: {e}", self.config.output.json)))
        }
    }
}

/// Writes a CSV file: one header line plus pre-formatted rows. Floats use
/// the shortest round-trip decimal representation.
pub fn write_csv(path: &str, header: &str, rows: &[String]) -> CliResult<()> {
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{path}: {e}")))
}
