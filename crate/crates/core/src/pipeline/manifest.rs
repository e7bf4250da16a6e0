use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file; `label` is what gets recorded as its path.
pub fn digest_file(path: &Path, label: impl Into<String>) -> Result<FileDigest, PipelineError> {
    let bytes = std::fs::read(path).map_err(PipelineError::io(path))?;
    Ok(FileDigest {
        path: label.into(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Record flow through a stage. For filtering stages `n_in = n_out + n_dropped`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub n_in: usize,
    pub n_out: usize,
    pub n_dropped: usize,
}

impl std::ops::AddAssign for StageCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.n_in += rhs.n_in;
        self.n_out += rhs.n_out;
        self.n_dropped += rhs.n_dropped;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub schema_version: u32,
    pub stage: String,
    pub tool_version: String,
    pub inputs: BTreeMap<String, FileDigest>,
    /// Keyed by file name inside the stage directory.
    pub outputs: BTreeMap<String, FileDigest>,
    pub config: serde_json::Value,
    pub counts: StageCounts,
    pub started_at: String,
    pub finished_at: String,
}

impl StageManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
        let manifest: StageManifest = serde_json::from_str(&text).map_err(|e| PipelineError::CorruptManifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(PipelineError::CorruptManifest {
                path: path.to_path_buf(),
                message: format!("unsupported schema_version {}", manifest.schema_version),
            });
        }
        Ok(manifest)
    }

    /// Writes via a temporary file and rename so a crash never leaves a
    /// half-written manifest behind.
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let tmp = path.with_extension("json.tmp");
        write_json_pretty(&tmp, self)?;
        std::fs::rename(&tmp, path).map_err(PipelineError::io(path))
    }
}

pub(crate) fn write_json_pretty<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Stage(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(PipelineError::io(path))
}
