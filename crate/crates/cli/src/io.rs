use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sabr_lab::calibration::{QuotePoint, SmileQuotes};

use crate::error::CliError;

/// Everything needed to rerun an experiment bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// The command line as invoked.
    pub command: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, params: &impl Serialize, seed: Option<u64>) -> Result<Self, CliError> {
        Ok(Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect(),
            params: serde_json::to_value(params).map_err(|e| CliError::Io(format!("cannot echo parameters: {e}")))?,
            seed,
            outputs: Vec::new(),
        })
    }

    /// Writes the manifest itself as `manifest.json` in `dir`.
    pub fn write(mut self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        self.outputs.push(path.display().to_string());
        write_json(&path, &self)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

pub fn output_path(dir: &Path, name: &str, manifest: &mut RunManifest) -> PathBuf {
    let path = dir.join(name);
    manifest.outputs.push(path.display().to_string());
    path
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Reads a JSON config; unreadable files are I/O errors, malformed content
/// is a validation error.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
}

/// Reads a `strike,normal_vol` CSV file.
pub fn read_quotes(path: &Path, forward: f64, expiry: f64) -> Result<SmileQuotes, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["strike", "normal_vol"] {
        return Err(CliError::Validation(format!(
            "{}: expected header strike,normal_vol, got {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let points = reader
        .deserialize::<QuotePoint>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::Validation(format!("{}: row {}: {e}", path.display(), i + 2))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SmileQuotes::new(expiry, forward, points)?)
}
