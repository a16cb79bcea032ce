//! Stage directories and their manifests. Every file a stage writes is
//! hashed into `manifest.json` next to it, together with the hashes of the
//! inputs it read, the effective configuration and the seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Loaded;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the configuration as it was applied: the seed is the effective
/// one and the output directory is left out, so moving a run does not
/// change it.
pub fn config_hash(cfg: &Loaded) -> String {
    let mut c = cfg.config.clone();
    c.seed = Some(cfg.seed);
    c.out = None;
    let json = serde_json::to_vec(&c).expect("config serializes");
    sha256_hex(&json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Input files by name.
    pub inputs: BTreeMap<String, String>,
    /// Files of this stage, relative to its directory.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<String>,
}

pub struct Stage {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl Stage {
    /// Creates (or empties) `<out>/<name>`.
    pub fn create(cfg: &Loaded, name: &str) -> CliResult<Self> {
        let dir = cfg.out.join(name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::User(format!("cannot clear {}: {e}", dir.display())))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::User(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                stage: name.into(),
                seed: cfg.seed,
                config_sha256: config_hash(cfg),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                failed: Vec::new(),
            },
        })
    }

    pub fn input(&mut self, name: impl Into<String>, path: &Path) -> CliResult<()> {
        let h = hash_file(path)?;
        self.manifest.inputs.insert(name.into(), h);
        Ok(())
    }

    /// Records every output of an upstream stage as an input.
    pub fn upstream(&mut self, cfg: &Loaded, stage: &str) -> CliResult<()> {
        let m = read_manifest(cfg, stage)?;
        for (k, v) in m.outputs {
            self.manifest.inputs.insert(format!("{stage}/{k}"), v);
        }
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::User(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.insert(rel.into(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn fail(&mut self, what: String) {
        self.manifest.failed.push(what);
    }

    pub fn finish(self) -> CliResult<Manifest> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, bytes).map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(cfg: &Loaded, stage: &str) -> CliResult<Manifest> {
    let path = cfg.out.join(stage).join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|_| CliError::User(missing_stage(stage, &path)))?;
    serde_json::from_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn missing_stage(stage: &str, path: &Path) -> String {
    format!("{} not found; run `gvar-sv {stage}` first", path.display())
}

/// Reads a JSON artifact of an earlier stage.
pub fn read_json<T: for<'de> Deserialize<'de>>(cfg: &Loaded, stage: &str, rel: &str) -> CliResult<T> {
    let path = cfg.out.join(stage).join(rel);
    let text = fs::read_to_string(&path).map_err(|_| CliError::User(missing_stage(stage, &path)))?;
    serde_json::from_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}
