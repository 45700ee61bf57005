//! `manifest.json`: config hash plus per-stage input/output artifact hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// Resolved config of the most recent stage, defaults included.
    pub config: serde_json::Value,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// Hashes a file or every file below a directory, in path order.
fn hash_entry(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for f in files {
            h.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
            h.update(sha256_file(&f)?.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    } else {
        sha256_file(path)
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

impl Manifest {
    pub fn load_or_default(out_dir: &Path) -> Result<Self> {
        let p = out_dir.join(MANIFEST_FILE);
        if !p.exists() {
            return Ok(Self {
                tool: "elevate".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                ..Self::default()
            });
        }
        let text = std::fs::read_to_string(&p)?;
        serde_json::from_str(&text).with_context(|| format!("corrupt manifest {}", p.display()))
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Checks that `artifact` (relative to `out_dir`) exists and still has
    /// the hash `producer` recorded for it.
    pub fn verify(&self, out_dir: &Path, artifact: &str, producer: &str) -> Result<()> {
        let path = out_dir.join(artifact);
        if !path.exists() {
            bail!("missing artifact {artifact}: run `elevate {producer}` first");
        }
        let Some(stage) = self.stages.get(producer) else {
            bail!("{artifact} exists but the manifest has no `{producer}` stage: re-run `elevate {producer}`");
        };
        let Some(expected) = stage.outputs.get(artifact) else {
            bail!("manifest stage `{producer}` does not list {artifact}: re-run `elevate {producer}`");
        };
        let actual = hash_entry(&path)?;
        if &actual != expected {
            bail!("{artifact} changed since `elevate {producer}` wrote it (hash mismatch): re-run `elevate {producer}`");
        }
        Ok(())
    }

    pub fn record(
        &mut self,
        stage: &str,
        config_json: &str,
        out_dir: &Path,
        inputs: &[(String, PathBuf)],
        outputs: &[&str],
    ) -> Result<()> {
        let config_sha256 = sha256_bytes(config_json.as_bytes());
        let mut rec = StageRecord {
            config_sha256: config_sha256.clone(),
            ..StageRecord::default()
        };
        for (name, p) in inputs {
            rec.inputs.insert(name.clone(), hash_entry(p)?);
        }
        for o in outputs {
            rec.outputs.insert(o.to_string(), hash_entry(&out_dir.join(o))?);
        }
        self.config_sha256 = config_sha256;
        self.config = serde_json::from_str(config_json)?;
        self.stages.insert(stage.to_string(), rec);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn verify_detects_tampering_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let mut m = Manifest::load_or_default(dir.path()).unwrap();
        m.record("ingest", "{}", dir.path(), &[], &["a.csv"]).unwrap();
        m.verify(dir.path(), "a.csv", "ingest").unwrap();
        std::fs::write(dir.path().join("a.csv"), "y\n").unwrap();
        let err = m.verify(dir.path(), "a.csv", "ingest").unwrap_err().to_string();
        assert!(err.contains("re-run `elevate ingest`"), "{err}");
        let err = m.verify(dir.path(), "b.csv", "fit-hazard").unwrap_err().to_string();
        assert!(err.contains("run `elevate fit-hazard` first"), "{err}");
    }
}
