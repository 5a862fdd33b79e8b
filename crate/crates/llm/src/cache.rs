//! Content-addressed response cache: one JSONL file per key.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::client::GenerationRecord;
use crate::{LlmError, Result};

pub struct Cache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl Cache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.jsonl"))
    }

    pub fn get(&self, key: &str) -> Result<Option<GenerationRecord>> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let record: GenerationRecord = serde_json::from_str(line).map_err(|e| cache_err(&path, e))?;
        if record.cache_key != key {
            return Err(cache_err(&path, "stored key does not match file name"));
        }
        Ok(Some(record))
    }

    /// Writes through a temporary file so readers never see partial records.
    pub fn put(&self, record: &GenerationRecord) -> Result<()> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.path(&record.cache_key);
        let tmp = self.dir.join(format!(".{}.tmp", record.cache_key));
        let line = serde_json::to_string(record).map_err(|e| cache_err(&path, e))? + "\n";
        fs::write(&tmp, line).map_err(|e| cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_err(&path, e))
    }
}

fn cache_err(path: &Path, e: impl std::fmt::Display) -> LlmError {
    LlmError::Cache {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
