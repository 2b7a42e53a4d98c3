//! Content-hash manifest of emitted artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Files whose content legitimately differs between reruns.
pub const VOLATILE_FILES: [&str; 1] = ["timing.json"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Excluded from reproducibility comparisons.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub volatile: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<String>,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Hashes of every non-volatile file, for rerun comparisons.
    pub fn stable_hashes(&self) -> Vec<(&str, &str)> {
        self.files
            .iter()
            .filter(|f| !f.volatile)
            .map(|f| (f.path.as_str(), f.sha256.as_str()))
            .collect()
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::stage("manifest", format!("{}: {e}", path.display())))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Hashes `files` (relative to `dir`) and writes `manifest.json`.
pub fn write_manifest(dir: &Path, stages: Vec<String>, seed: u64, files: &[String]) -> Result<Manifest, CliError> {
    let mut sorted: Vec<&String> = files.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut entries = Vec::with_capacity(sorted.len());
    for rel in sorted {
        let (sha256, bytes) = sha256_file(&dir.join(rel))?;
        entries.push(ManifestEntry {
            path: rel.clone(),
            sha256,
            bytes,
            volatile: VOLATILE_FILES.contains(&rel.as_str()),
        });
    }
    let manifest = Manifest {
        stages,
        seed,
        files: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
        .map_err(|e| CliError::stage("manifest", format!("{}: {e}", dir.display())))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
