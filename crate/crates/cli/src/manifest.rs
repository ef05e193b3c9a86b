use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A file read or written by a run, pinned by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::config(anyhow::Error::new(e).context(format!("reading {}", path.display()))))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun a command and get the same bytes back.
///
/// Deliberately free of timestamps and host details so that two identical
/// runs also produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// The fully resolved arguments, defaults included.
    pub args: serde_json::Value,
    pub config_paths: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_digest: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, args: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: serde_json::to_value(args).expect("arguments serialize"),
            config_paths: Vec::new(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            policy_digest: None,
        }
    }

    pub fn config(mut self, path: Option<&Path>) -> Self {
        self.config_paths.extend(path.map(Path::to_path_buf));
        self
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self, CliError> {
        self.inputs.push(Artifact::of(path)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Result<Self, CliError> {
        self.outputs.push(Artifact::of(path)?);
        Ok(self)
    }

    pub fn policy(mut self, path: &Path) -> Result<Self, CliError> {
        self.policy_digest = Some(Artifact::of(path)?.sha256);
        Ok(self)
    }

    /// Writes the manifest to `path`, or next to `primary` as
    /// `<stem>.manifest.json` when no path is given.
    pub fn write(&self, path: Option<&Path>, primary: &Path) -> Result<PathBuf, CliError> {
        let target = path.map(Path::to_path_buf).unwrap_or_else(|| manifest_path(primary));
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        pacroute_gateway::write_atomic(&target, text.as_bytes())?;
        Ok(target)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}.manifest.json"))
}
