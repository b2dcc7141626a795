//! Run manifests and content digests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binfmt::{read_file, write_atomic, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub inputs: Vec<FileDigest>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<FileDigest>,
    pub wall_time_secs: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of a file; the recorded path is absolute when it can be resolved.
pub fn digest_file(path: &Path) -> Result<FileDigest, FormatError> {
    let sha256 = sha256_hex(&read_file(path)?);
    let path = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256,
    })
}

/// Stage seed: the first 8 bytes of `sha256(seed_le || stage)`.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

pub fn manifest_dir(workspace: &Path) -> PathBuf {
    workspace.join("manifests")
}

/// `<workspace>/manifests/<stage>.<output file name>.json`.
pub fn manifest_path(workspace: &Path, stage: &str, output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    manifest_dir(workspace).join(format!("{stage}.{name}.json"))
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let bytes = read_file(path)?;
        serde_json::from_slice(&bytes).map_err(|e| FormatError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Outputs whose current content no longer matches the recorded digest.
    pub fn stale_outputs(&self) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| {
                digest_file(Path::new(&o.path))
                    .map(|d| d.sha256 != o.sha256)
                    .unwrap_or(true)
            })
            .map(|o| o.path.clone())
            .collect()
    }
}
