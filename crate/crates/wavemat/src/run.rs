//! Configuration loading and hashed run directories.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use wavemat_core::config::KvConfig;

use crate::dataset_io::write_text;
use crate::{Error, Result};

/// The built-in defaults, then `file`, then each `key=value` override.
pub fn load_config(file: Option<&Path>, overrides: &[String]) -> Result<KvConfig> {
    let mut cfg = KvConfig::builtin();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let user = KvConfig::parse(&text).map_err(|e| match e {
            wavemat_core::Error::Config { line, message } => Error::format(path, line, message),
            other => other.into(),
        })?;
        cfg.merge(&user);
    }
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .filter(|(k, _)| !k.trim().is_empty())
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

/// First 16 hex digits of SHA-256 over the effective config and a
/// description of the invocation.
pub fn config_hash(cfg: &KvConfig, invocation: &str) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_text().as_bytes());
    h.update(b"\0");
    h.update(invocation.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's bytes, as 64 hex digits. Run directories are keyed
/// by input contents rather than paths.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<base>/<command>-<hash>` and writes `config.conf` into it.
    pub fn create(base: &Path, command: &str, cfg: &KvConfig, invocation: &str) -> Result<Self> {
        let path = base.join(format!("{command}-{}", config_hash(cfg, invocation)));
        fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        let dir = RunDir { path };
        dir.write("config.conf", &cfg.to_text())?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.file(name);
        write_text(&p, text)?;
        Ok(p)
    }
}
