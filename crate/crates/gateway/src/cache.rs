use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{GatewayError, Result};

/// Content-addressed on-disk cache: one JSON file per key, sharded by the
/// first two hex digits. Writes go to a temporary file that is renamed into
/// place, so readers never see a partial entry.
#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

/// Hex SHA-256 of the JSON encoding of `parts`.
pub fn cache_key<K: Serialize>(parts: &K) -> String {
    let json = serde_json::to_vec(parts).expect("cache key serializes");
    let mut h = Sha256::new();
    h.update(b"pacroute-cache-v1\n");
    h.update(&json);
    hex::encode(h.finalize())
}

impl DiskCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| GatewayError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        if key.len() < 3 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(GatewayError::Cache(format!("invalid cache key {key:?}")));
        }
        Ok(self.root.join(&key[..2]).join(format!("{key}.json")))
    }

    /// A corrupt entry is reported as a miss so it gets rewritten.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        let path = self.path(key)?;
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::io(path, e)),
        };
        match serde_json::from_slice(&bytes) {
            Ok(v) => Ok(Some(v)),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                Ok(None)
            }
        }
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<()> {
        let path = self.path(key)?;
        let dir = path.parent().expect("sharded path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| GatewayError::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| GatewayError::io(dir, e))?;
        serde_json::to_writer(&mut tmp, value).map_err(|e| GatewayError::Cache(e.to_string()))?;
        tmp.flush().map_err(|e| GatewayError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| GatewayError::io(&path, e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        walk_count(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk_count(dir: &Path) -> usize {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return 0;
    };
    entries
        .flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_count(&p)
            } else {
                usize::from(p.extension().is_some_and(|x| x == "json"))
            }
        })
        .sum()
}
