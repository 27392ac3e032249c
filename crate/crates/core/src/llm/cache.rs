use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub prompt: String,
    pub response: String,
    pub model: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Content-addressed response store: one `<key>.json` file per record.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl DiskCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| LlmError::Config(format!("cache dir {}: {e}", dir.display())))?;
        Ok(Self { dir, write_lock: Mutex::new(()) })
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Missing or unreadable records are misses.
    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        let raw = fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&raw).ok()
    }

    /// Write via a temporary file and rename so readers never see a partial record.
    pub fn put(&self, key: &str, record: &CacheRecord) -> std::io::Result<()> {
        let _guard = self.write_lock.lock().expect("cache write lock");
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&serde_json::to_vec_pretty(record).expect("record serializes"))?;
            file.sync_all()?;
        }
        fs::rename(&tmp, self.path_for(key))
    }
}
