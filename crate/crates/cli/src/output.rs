//! CSV and manifest writers. Numeric CSV cells carry at least 13
//! significant digits so regression tooling can diff files byte-for-byte.

use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use crate::CliError;

pub fn format_value(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = fs::File::create(path)?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Record of one invocation: resolved configuration, seed, and the files
/// it produced. Re-running the tool with the recorded configuration
/// reproduces every listed output byte-for-byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub resolved_config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub duration_ms: u128,
}

impl RunManifest {
    pub fn new(
        command: &str,
        resolved_config: serde_json::Value,
        seed: Option<u64>,
        outputs: &[&Path],
        elapsed: Duration,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            resolved_config,
            seed,
            outputs: outputs
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect(),
            duration_ms: elapsed.as_millis(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(
            path,
            serde_json::to_string_pretty(self).expect("manifest serializes"),
        )?;
        Ok(())
    }
}
