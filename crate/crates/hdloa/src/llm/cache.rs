//! Content-addressed response cache: one JSON record per key under a cache
//! directory.
//!
//! Records are immutable and keyed by the request digest, so identical keys
//! always carry identical content and concurrent writers can race safely —
//! the write goes through a temp file and an atomic rename, and last write
//! wins over bytes that are equal anyway. Experiment shards can share one
//! cache directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, LlmError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub prompt: String,
    pub response: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)
            .map_err(|e| LlmError::Cache(format!("create {}: {e}", dir.display())))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, LlmError> {
        let path = self.path_for(key);
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let record: CacheRecord = serde_json::from_str(&text)
                    .map_err(|e| LlmError::Cache(format!("corrupt {}: {e}", path.display())))?;
                Ok(Some(record.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LlmError::Cache(format!("read {}: {e}", path.display()))),
        }
    }

    pub fn put(
        &self,
        key: &str,
        request: &CompletionRequest,
        response: &str,
    ) -> Result<(), LlmError> {
        let record = CacheRecord {
            key: key.to_string(),
            model_id: request.model_id.clone(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            stop_sequences: request.stop_sequences.clone(),
            prompt: request.prompt.clone(),
            response: response.to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let body = serde_json::to_vec_pretty(&record)
            .map_err(|e| LlmError::Cache(format!("encode record: {e}")))?;

        let tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| LlmError::Cache(format!("temp file in {}: {e}", self.dir.display())))?;
        std::io::Write::write_all(&mut tmp.as_file(), &body)
            .map_err(|e| LlmError::Cache(format!("write record: {e}")))?;
        tmp.persist(self.path_for(key))
            .map_err(|e| LlmError::Cache(format!("persist record: {e}")))?;
        Ok(())
    }

    pub fn stats(&self) -> Result<CacheStats, LlmError> {
        let mut entries = 0usize;
        let mut bytes = 0u64;
        let read = std::fs::read_dir(&self.dir)
            .map_err(|e| LlmError::Cache(format!("read dir {}: {e}", self.dir.display())))?;
        for entry in read {
            let entry = entry.map_err(|e| LlmError::Cache(e.to_string()))?;
            if entry.path().extension().is_some_and(|e| e == "json") {
                entries += 1;
                bytes += entry.metadata().map(|m| m.len()).unwrap_or(0);
            }
        }
        Ok(CacheStats { entries, bytes })
    }
}
