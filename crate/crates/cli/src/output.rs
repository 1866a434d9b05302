//! Result files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Writes `bytes` to a sibling temp file, syncs it, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Pretty JSON with a trailing newline. Object keys come out in a fixed
/// order (struct order, or sorted for maps), so equal values give equal
/// bytes.
pub fn json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    /// The experiment could not be evaluated (for example no convergence).
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub kind: String,
    pub prefix: String,
    pub seed: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub files: Vec<String>,
}

/// Summary of one `run`, written as `manifest.json` next to the results.
/// It is the only output that carries a timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch at the end of the run.
    pub timestamp: u64,
    pub seed_override: Option<u64>,
    pub experiments: Vec<ExperimentRecord>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], seed_override: Option<u64>, experiments: Vec<ExperimentRecord>) -> Self {
        let files = experiments.iter().flat_map(|e| e.files.iter().cloned()).collect();
        RunManifest {
            config_sha256: sha256_hex(config_bytes),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            seed_override,
            experiments,
            files,
        }
    }

    /// Files listed in the manifest that are missing under `dir`.
    pub fn missing_files(&self, dir: &Path) -> Vec<PathBuf> {
        self.files.iter().map(|f| dir.join(f)).filter(|p| !p.is_file()).collect()
    }
}
