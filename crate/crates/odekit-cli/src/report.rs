//! Run reports: every command writes one `report.json` tying its metrics to
//! the exact config bytes (by hash), the effective seed, and the tool
//! version. Timing lives in its own subobject so determinism checks can
//! strip it.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: "odekit".to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub metrics: serde_json::Value,
    pub timing: serde_json::Value,
}

/// SHA-256 of the config file bytes, lowercase hex.
pub fn config_hash(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `report.json` (pretty, trailing newline) into the output dir.
pub fn write_report(out: &Path, report: &RunReport) -> io::Result<PathBuf> {
    let path = out.join("report.json");
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    std::fs::write(&path, body)?;
    Ok(path)
}
