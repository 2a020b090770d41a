//! Run manifest: per-stage output lists with checksums, plus the lock file
//! that keeps one process per output directory.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use entv_core::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".entv.lock";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StageRecord {
    pub completed: bool,
    pub wall_ms: u64,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub threads: usize,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(config_hash: String, threads: usize) -> Manifest {
        Manifest {
            config_hash,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            stages: BTreeMap::new(),
        }
    }

    pub fn load(out_dir: &Path) -> Result<Option<Manifest>> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::validation(format!("corrupt manifest: {e}")))
    }

    /// Atomic write: temp file then rename.
    pub fn store(&self, out_dir: &Path) -> Result<()> {
        let tmp = out_dir.join(format!("{MANIFEST_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::numerical(format!("manifest serialization: {e}")))?;
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, out_dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    /// A stage can be skipped when it completed under the same config and
    /// every output is still present with a matching checksum.
    pub fn stage_is_current(&self, out_dir: &Path, name: &str, config_hash: &str) -> bool {
        if self.config_hash != config_hash {
            return false;
        }
        let Some(stage) = self.stages.get(name) else {
            return false;
        };
        if !stage.completed {
            return false;
        }
        stage.outputs.iter().all(|o| {
            let path = out_dir.join(&o.path);
            path.exists() && sha256_file(&path).map(|h| h == o.sha256).unwrap_or(false)
        })
    }

    pub fn record_stage(
        &mut self,
        out_dir: &Path,
        name: &str,
        outputs: &[PathBuf],
        wall_ms: u64,
        completed: bool,
    ) -> Result<()> {
        let mut records = Vec::new();
        for rel in outputs {
            let path = out_dir.join(rel);
            records.push(OutputRecord {
                path: rel.to_string_lossy().into_owned(),
                sha256: sha256_file(&path)?,
            });
        }
        self.stages.insert(
            name.to_string(),
            StageRecord { completed, wall_ms, outputs: records },
        );
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn sha256_str(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Holds the per-directory lock for the lifetime of the run.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out_dir: &Path) -> Result<DirLock> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::validation(format!(
                    "output directory is locked by another run ({}); remove {} \
                     if that run is dead",
                    out_dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
