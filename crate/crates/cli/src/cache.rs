//! Single-file JSON cache for projection-kernel entries.
//!
//! Entries are keyed by the full quadrature configuration and stamped with
//! the tool version: a version bump invalidates the whole store. Reads take
//! no lock (concurrent readers are fine); writes serialize through a lock
//! file created with `create_new`, retried briefly, and are atomic. A
//! corrupted store is reported on stderr and rebuilt on the next write.
//!
//! The cache directory defaults to `.villain-cache` under the working
//! directory; `VILLAIN_CACHE_DIR` overrides it. `VILLAIN_CACHE_VERSION`
//! overrides the version stamp (a test hook for exercising invalidation).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// One cached kernel entry, self-describing for audit purposes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PiCacheRecord {
    pub d: usize,
    pub offset: Vec<i64>,
    pub alpha_p: Vec<u8>,
    pub alpha_q: Vec<u8>,
    pub grid_n: usize,
    pub value: f64,
}

impl PiCacheRecord {
    pub fn key(&self) -> String {
        cache_key(self.d, &self.offset, &self.alpha_p, &self.alpha_q, self.grid_n)
    }
}

pub fn cache_key(d: usize, offset: &[i64], alpha_p: &[u8], alpha_q: &[u8], grid_n: usize) -> String {
    let join_i = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let join_u = |v: &[u8]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    format!(
        "d={d};off={};ap={};aq={};grid={grid_n}",
        join_i(offset),
        join_u(alpha_p),
        join_u(alpha_q)
    )
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Store {
    version: String,
    entries: BTreeMap<String, PiCacheRecord>,
}

#[derive(Debug)]
pub struct Cache {
    path: PathBuf,
    version: String,
}

/// Errors surfaced by the cache; the lock timeout is the only retryable one.
#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache lock timed out after {0:?}; retry the invocation")]
    LockTimeout(Duration),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn acquire_lock(lock_path: &Path) -> Result<LockGuard, CacheError> {
    const ATTEMPTS: u32 = 100;
    const PAUSE: Duration = Duration::from_millis(20);
    for _ in 0..ATTEMPTS {
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(lock_path)
        {
            Ok(_) => {
                return Ok(LockGuard {
                    path: lock_path.to_path_buf(),
                })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                std::thread::sleep(PAUSE)
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(CacheError::LockTimeout(PAUSE * ATTEMPTS))
}

impl Cache {
    /// Open the default cache: directory from `VILLAIN_CACHE_DIR` (falling
    /// back to `./.villain-cache`), version stamp from
    /// `VILLAIN_CACHE_VERSION` (falling back to the crate version).
    pub fn open_default() -> Cache {
        let dir = std::env::var_os("VILLAIN_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".villain-cache"));
        let version = std::env::var("VILLAIN_CACHE_VERSION")
            .unwrap_or_else(|_| env!("CARGO_PKG_VERSION").to_string());
        Cache {
            path: dir.join("pi-cache.json"),
            version,
        }
    }

    /// Load the store, tolerating a missing or corrupted file (the latter
    /// with a warning) and discarding stores stamped by other versions.
    fn load(&self) -> Store {
        let bytes = match std::fs::read(&self.path) {
            Ok(b) => b,
            Err(_) => return Store::default(),
        };
        match serde_json::from_slice::<Store>(&bytes) {
            Ok(store) if store.version == self.version => store,
            Ok(_) => Store::default(),
            Err(e) => {
                eprintln!(
                    "warning: cache store {} is corrupted ({e}); rebuilding",
                    self.path.display()
                );
                Store::default()
            }
        }
    }

    /// Lock-free read; absent keys are `None`, never an error.
    pub fn get(&self, key: &str) -> Option<PiCacheRecord> {
        self.load().entries.get(key).cloned()
    }

    /// Insert one record (read-modify-write under the store lock, written
    /// atomically).
    pub fn put(&self, record: PiCacheRecord) -> Result<(), CacheError> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let _guard = acquire_lock(&self.path.with_extension("json.lock"))?;
        let mut store = self.load();
        store.version = self.version.clone();
        store.entries.insert(record.key(), record);
        let bytes = serde_json::to_vec_pretty(&store).expect("store serializes");
        crate::record::atomic_write(&self.path, &bytes)?;
        Ok(())
    }
}
