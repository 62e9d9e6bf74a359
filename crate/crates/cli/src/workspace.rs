//! On-disk state for one data directory.
//!
//! ```text
//! <data_dir>/config.json    engine + pricing settings
//! <data_dir>/admin.key      hex AES-256 key (manifest + script blobs)
//! <data_dir>/ledger.jsonl   the chain, replayed on every invocation
//! <data_dir>/store/         encrypted blobs, sealed manifest, grade sheets
//! <data_dir>/records/       academic records handed to students at commit
//! <data_dir>/.lock          held while a command runs
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use examledger::blob_store::{AdminKey, BlobStore};
use examledger::workload::PricingConfig;
use examledger::{Clock, Engine, EngineConfig};
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub engine: EngineConfig,
    pub pricing: PricingConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig {
                clock: Clock::System,
                ..Default::default()
            },
            pricing: PricingConfig::default(),
        }
    }
}

/// Exclusive hold on a data directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => bail!(
                "data directory {} is locked by another examledger process (remove {} if it is stale)",
                dir.display(),
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct Workspace {
    pub dir: PathBuf,
    pub engine: Engine,
    pub store: BlobStore,
    pub key: AdminKey,
    persisted: usize,
    _lock: DirLock,
}

pub fn ledger_path(dir: &Path) -> PathBuf {
    dir.join("ledger.jsonl")
}

pub fn load_config(dir: &Path) -> Result<CliConfig> {
    let path = dir.join("config.json");
    if !path.exists() {
        return Ok(CliConfig::default());
    }
    let raw = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))
}

impl Workspace {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let lock = DirLock::acquire(dir)?;

        let config_path = dir.join("config.json");
        let config = load_config(dir)?;
        if !config_path.exists() {
            fs::write(&config_path, serde_json::to_vec_pretty(&config)?)?;
        }

        let key_path = dir.join("admin.key");
        let key = if key_path.exists() {
            let text = fs::read_to_string(&key_path)?;
            let bytes = hex::decode(text.trim()).context("admin.key is not hex")?;
            AdminKey::from_slice(&bytes)?
        } else {
            let key = AdminKey::generate(&mut OsRng);
            fs::write(&key_path, key.to_hex() + "\n")?;
            key
        };

        let ledger = ledger_path(dir);
        let engine = if ledger.exists() {
            let f = BufReader::new(File::open(&ledger)?);
            Engine::restore(config.engine.clone(), f).with_context(|| format!("replaying {}", ledger.display()))?
        } else {
            Engine::new(config.engine.clone())?
        };
        let store = BlobStore::open_with_os_rng(dir.join("store"), &key)?;
        let persisted = engine.ledger().entries().len();
        Ok(Workspace {
            dir: dir.to_path_buf(),
            engine,
            store,
            key,
            persisted,
            _lock: lock,
        })
    }

    /// Appends entries created during this invocation to the ledger file.
    pub fn persist(&mut self) -> Result<()> {
        let entries = &self.engine.ledger().entries()[self.persisted..];
        if entries.is_empty() {
            return Ok(());
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(ledger_path(&self.dir))?;
        let mut out = BufWriter::new(file);
        for entry in entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        self.persisted += entries.len();
        Ok(())
    }

    pub fn records_dir(&self) -> PathBuf {
        self.dir.join("records")
    }
}
