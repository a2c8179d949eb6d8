//! Output directory: lockfile, content hashes and the run manifest.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".expheat.lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one completed stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of the stage's configuration and upstream artifacts.
    pub key: String,
    /// Emitted file (relative path) -> sha256.
    pub artifacts: BTreeMap<String, String>,
    pub seconds: f64,
}

/// Summary of everything the pipeline has produced in one directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
    pub m_star: Option<f64>,
    pub big_r: Option<f64>,
    pub r_inf: Option<f64>,
    pub decay_constant: Option<f64>,
    pub lp_norms: BTreeMap<String, f64>,
    pub eta: Option<serde_json::Value>,
    /// `None` until an evolve run with the Picard step; `Some(false)` after `--skip-picard`.
    pub picard_present: Option<bool>,
    pub picard: Option<serde_json::Value>,
    pub residuals: Option<serde_json::Value>,
}

impl RunManifest {
    /// All artifact hashes, across stages.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.stages.values().flat_map(|s| s.artifacts.clone()).collect()
    }
}

/// Exclusive handle on an output directory; the lockfile is removed on drop.
pub struct Store {
    root: PathBuf,
    lock: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Usage(format!(
                    "{} is locked by another run (remove {} if that run is gone)",
                    root.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Store { root: root.to_path_buf(), lock })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> Result<RunManifest, CliError> {
        let p = self.path(MANIFEST);
        if !p.exists() {
            return Ok(RunManifest::default());
        }
        Ok(serde_json::from_slice(&fs::read(p)?)?)
    }

    pub fn save_manifest(&self, m: &RunManifest) -> Result<(), CliError> {
        self.write_raw(MANIFEST, &serde_json::to_vec_pretty(m)?)?;
        Ok(())
    }

    /// Writes through a temporary file and returns the content hash.
    pub fn write_raw(&self, rel: &str, bytes: &[u8]) -> Result<String, CliError> {
        let dest = self.path(rel);
        if let Some(dir) = dest.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = dest.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &dest)?;
        Ok(sha256_hex(bytes))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_raw(rel, &bytes)
    }

    pub fn read(&self, rel: &str) -> Result<Vec<u8>, CliError> {
        fs::read(self.path(rel)).map_err(|e| CliError::Usage(format!("{rel}: {e}")))
    }

    /// Files whose current content does not match the recorded hash.
    pub fn mismatches(&self, recorded: &BTreeMap<String, String>) -> Vec<String> {
        recorded
            .iter()
            .filter(|(rel, hash)| fs::read(self.path(rel)).map_or(true, |b| &sha256_hex(&b) != *hash))
            .map(|(rel, _)| rel.clone())
            .collect()
    }

    /// True when `stage` was completed with `key` and its files are intact.
    pub fn is_fresh(&self, manifest: &RunManifest, stage: &str, key: &str) -> bool {
        manifest.stages.get(stage).is_some_and(|s| s.key == key && self.mismatches(&s.artifacts).is_empty())
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = Store::open(dir.path()).unwrap();
        assert!(matches!(Store::open(dir.path()), Err(CliError::Usage(_))));
        drop(a);
        assert!(Store::open(dir.path()).is_ok());
    }

    #[test]
    fn hashes_detect_changes() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let h = s.write_raw("a/b.txt", b"hello").unwrap();
        assert_eq!(h, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        let rec: BTreeMap<_, _> = [("a/b.txt".to_string(), h)].into();
        assert!(s.mismatches(&rec).is_empty());
        std::fs::write(dir.path().join("a/b.txt"), b"hellO").unwrap();
        assert_eq!(s.mismatches(&rec), vec!["a/b.txt".to_string()]);
    }
}
