//! Per-invocation state: the effective configuration, its hash, input
//! checks and staged outputs.

use std::fmt::{self, Display};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use pwrules::kv::KvConfig;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

/// Bad flags, configuration or missing inputs (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Ctx {
    command: String,
    kv: KvConfig,
    pub seed: u64,
}

impl Ctx {
    pub fn new(command: &str, config: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut kv = match config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
                KvConfig::parse(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
            None => KvConfig::new(),
        };
        let seed = match seed {
            Some(s) => s,
            None => kv.get("seed").map_err(|e| usage(e.to_string()))?.unwrap_or(0),
        };
        kv.set("seed", seed);
        Ok(Ctx {
            command: command.to_string(),
            kv,
            seed,
        })
    }

    /// Flag, else config key, else `default`. The resolved value is recorded
    /// in the effective configuration.
    pub fn param<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.kv.get(key).map_err(|e| usage(e.to_string()))?.unwrap_or(default),
        };
        self.kv.set(key, &v);
        Ok(v)
    }

    pub fn section(&self, prefix: &str) -> KvConfig {
        self.kv.section(prefix)
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.kv.set(key, value);
    }

    /// SHA-256 of the command name and the effective configuration.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        h.update(self.kv.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn header(&self) -> String {
        format!("# pwrules {} config_sha256={}", self.command, self.config_hash())
    }

    /// Fails with a usage error naming every path that does not exist.
    pub fn require<P: AsRef<Path>>(&self, paths: impl IntoIterator<Item = P>) -> Result<()> {
        let missing: Vec<String> = paths
            .into_iter()
            .filter(|p| !p.as_ref().exists())
            .map(|p| p.as_ref().display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(usage(format!("missing input: {}", missing.join(", "))))
        }
    }

    pub fn outputs(&self) -> Outputs {
        Outputs {
            header: self.header(),
            hash: self.config_hash(),
            staged: Vec::new(),
        }
    }
}

/// Outputs are written to temporary files next to their targets and only
/// renamed into place by [`Outputs::commit`]; dropping the set discards
/// them.
pub struct Outputs {
    header: String,
    hash: String,
    staged: Vec<(PathBuf, NamedTempFile)>,
}

impl Outputs {
    fn stage(&mut self, path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let tmp = tempfile::Builder::new()
            .prefix(".pwrules-")
            .tempfile_in(dir)
            .with_context(|| format!("staging {}", path.display()))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            f(&mut w).with_context(|| format!("writing {}", path.display()))?;
            w.flush()?;
        }
        self.staged.push((path.to_path_buf(), tmp));
        Ok(())
    }

    /// Text output with the provenance header as its first line.
    pub fn text(&mut self, path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let header = self.header.clone();
        self.stage(path, |w| {
            writeln!(w, "{header}")?;
            f(w)
        })
    }

    /// Binary output, written as is.
    pub fn binary(&mut self, path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        self.stage(path, f)
    }

    /// Pretty JSON object with a `config_sha256` member added.
    pub fn json(&mut self, path: &Path, value: &impl serde::Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("config_sha256".into(), self.hash.clone().into());
        }
        self.stage(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &v)?;
            writeln!(w)?;
            Ok(())
        })
    }

    pub fn commit(self) -> Result<()> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (path, tmp) in self.staged {
            if let Err(e) = tmp.persist(&path) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.error).with_context(|| format!("moving output into place at {}", path.display()));
            }
            done.push(path);
        }
        Ok(())
    }
}
