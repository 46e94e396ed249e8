//! Run manifests: the record that lets any output be regenerated.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hetop::{DifThresholds, PenaltySpec};
use serde::{Deserialize, Serialize};

use crate::output::{to_json, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identification: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<DifThresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            tool: "hetop".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            ..Self::default()
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `<output>.manifest.json` next to a CSV or SVG output.
pub fn write_sidecar(output: &Path, manifest: &RunManifest) -> Result<()> {
    write_atomic(&sidecar_path(output), &to_json(manifest)?)
}

/// Loads a manifest from a sidecar file or from the `manifest` field of a JSON
/// output.
pub fn load(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let node = if value.get("args").is_some() { value } else { value.get("manifest").cloned().unwrap_or_default() };
    if node.is_null() {
        bail!("{} holds no run manifest", path.display());
    }
    Ok(serde_json::from_value(node)?)
}
