//! CSV writers and the JSON run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

/// Comma-separated, LF-terminated writer.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

/// Two-column `metric,value` table.
pub fn write_metric_rows(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Marks a failure while resolving the configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

impl ErrorRecord {
    pub fn from_error(e: &anyhow::Error) -> Self {
        use red_lwsgs::Error as E;
        let message = format!("{e:#}");
        let core = e.chain().find_map(|c| c.downcast_ref::<E>());
        let Some(core) = core else {
            let config = e.chain().any(|c| c.is::<ConfigError>());
            return ErrorRecord {
                kind: if config { "Config" } else { "Other" }.into(),
                message,
                diagnostics: None,
                iteration: None,
            };
        };
        let kind = match core {
            E::InvalidInput(_) => "InvalidInput",
            E::DimensionMismatch { .. } => "DimensionMismatch",
            E::NonFinite(_) => "NonFinite",
            E::Denoiser { .. } => "Denoiser",
            E::Config(_) => "Config",
            E::Divergence { .. } => "Divergence",
            E::UnsupportedOperator { .. } => "UnsupportedOperator",
            E::StepSize { .. } => "StepSize",
            E::NonContractive { .. } => "NonContractive",
            E::Singular(_) => "Singular",
            E::TooLarge { .. } => "TooLarge",
            E::DegenerateSeries(_) => "DegenerateSeries",
            E::Format(_) => "Format",
            E::Io { .. } => "Io",
        };
        let diagnostics = match core {
            E::Denoiser { diagnostics, .. } => diagnostics.clone(),
            _ => None,
        };
        let iteration = match core {
            E::Divergence { iteration } => Some(*iteration),
            _ => None,
        };
        ErrorRecord {
            kind: kind.into(),
            message,
            diagnostics,
            iteration,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: &'static str,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    pub started_unix: u64,
    pub wall_seconds: f64,
}

/// Collects artifacts of one invocation and writes `manifest.json` last.
pub struct Run {
    pub dir: PathBuf,
    command: String,
    config: BTreeMap<String, String>,
    outputs: Vec<String>,
    pub details: BTreeMap<String, serde_json::Value>,
    started: SystemTime,
}

impl Run {
    pub fn start(dir: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: BTreeMap::new(),
            outputs: Vec::new(),
            details: BTreeMap::new(),
            started: SystemTime::now(),
        })
    }

    pub fn set_config(&mut self, config: BTreeMap<String, String>) {
        self.config = config;
    }

    /// Path of an artifact inside the run directory, recorded in the manifest.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.details.insert(key.to_string(), v);
    }

    pub fn finish(self, outcome: &Result<()>) -> Result<()> {
        let error = outcome.as_ref().err().map(ErrorRecord::from_error);
        let m = Manifest {
            tool: "red-lwsgs",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            status: if error.is_some() { "error" } else { "ok" },
            config: self.config,
            outputs: self.outputs,
            details: self.details,
            error,
            started_unix: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds: self
                .started
                .elapsed()
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Shortest round-trip decimal form, used in every CSV.
pub fn num(v: f64) -> String {
    format!("{v}")
}
