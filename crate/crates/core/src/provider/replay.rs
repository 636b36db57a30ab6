use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{check_query, ModelBackend, ModelRequest, ProviderError, SearchBackend, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Call the inner backend and store every response.
    Record,
    /// Serve stored responses only; unseen requests are errors.
    Replay,
    /// Call the inner backend without touching the cache.
    Passthrough,
}

fn sha256_hex(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// Stable key for a completion: model, full message list, temperature.
pub fn cache_key(request: &ModelRequest) -> String {
    sha256_hex(&json!({
        "kind": "complete",
        "model_id": request.model_id,
        "messages": request.messages,
        "temperature": request.temperature,
    }))
}

pub fn search_cache_key(query: &str, k: usize) -> String {
    sha256_hex(&json!({ "kind": "search", "query": query, "k": k }))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    response: String,
    timestamp: String,
}

/// Append-only JSON-lines store of `{key, response, timestamp}`.
///
/// Later lines win when a key repeats. Appends are whole lines written
/// under a lock, so concurrent recorders never interleave.
pub struct ResponseCache {
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    /// Loads `path` if it exists; a missing file is an empty cache.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        match File::open(&path) {
            Ok(file) => {
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| ProviderError::Cache(e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let entry: CacheLine = serde_json::from_str(&line).map_err(|e| {
                        ProviderError::Cache(format!("{}:{}: {e}", path.display(), n + 1))
                    })?;
                    entries.insert(entry.key, entry.response);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(ProviderError::Cache(format!("{}: {e}", path.display()))),
        }
        Ok(ResponseCache {
            path,
            entries: Mutex::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: &str, response: &str) -> Result<(), ProviderError> {
        if self.get(key).as_deref() == Some(response) {
            return Ok(());
        }
        let line = serde_json::to_string(&CacheLine {
            key: key.to_owned(),
            response: response.to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
        .map_err(|e| ProviderError::Cache(e.to_string()))?;
        let mut writer = self.writer.lock().unwrap();
        if writer.is_none() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| ProviderError::Cache(format!("{}: {e}", self.path.display())))?;
            *writer = Some(file);
        }
        let file = writer.as_mut().unwrap();
        file.write_all(format!("{line}\n").as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| ProviderError::Cache(e.to_string()))?;
        self.entries
            .lock()
            .unwrap()
            .insert(key.to_owned(), response.to_owned());
        Ok(())
    }

    fn through(
        &self,
        mode: CacheMode,
        key: String,
        call: impl FnOnce() -> Option<Result<String, ProviderError>>,
    ) -> Result<String, ProviderError> {
        match mode {
            CacheMode::Replay => self.get(&key).ok_or(ProviderError::ReplayMiss { key }),
            CacheMode::Passthrough | CacheMode::Record => {
                let response = call().ok_or_else(|| {
                    ProviderError::Cache("no inner backend configured for this cache mode".into())
                })??;
                if mode == CacheMode::Record {
                    self.put(&key, &response)?;
                }
                Ok(response)
            }
        }
    }
}

pub struct RecordReplayModel {
    inner: Option<Arc<dyn ModelBackend>>,
    cache: Arc<ResponseCache>,
    mode: CacheMode,
}

impl RecordReplayModel {
    pub fn new(inner: Option<Arc<dyn ModelBackend>>, cache: Arc<ResponseCache>, mode: CacheMode) -> Self {
        RecordReplayModel { inner, cache, mode }
    }

    /// Replay-only backend; needs no inner model.
    pub fn replay(cache: Arc<ResponseCache>) -> Self {
        Self::new(None, cache, CacheMode::Replay)
    }
}

impl ModelBackend for RecordReplayModel {
    fn complete(&self, request: &ModelRequest) -> Result<String, ProviderError> {
        request.validate()?;
        self.cache.through(self.mode, cache_key(request), || {
            self.inner.as_ref().map(|inner| inner.complete(request))
        })
    }
}

pub struct RecordReplaySearch {
    inner: Option<Arc<dyn SearchBackend>>,
    cache: Arc<ResponseCache>,
    mode: CacheMode,
}

impl RecordReplaySearch {
    pub fn new(inner: Option<Arc<dyn SearchBackend>>, cache: Arc<ResponseCache>, mode: CacheMode) -> Self {
        RecordReplaySearch { inner, cache, mode }
    }

    pub fn replay(cache: Arc<ResponseCache>) -> Self {
        Self::new(None, cache, CacheMode::Replay)
    }
}

impl SearchBackend for RecordReplaySearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        check_query(query)?;
        let raw = self.cache.through(self.mode, search_cache_key(query, k), || {
            self.inner.as_ref().map(|inner| {
                inner.search(query, k).and_then(|results| {
                    serde_json::to_string(&results).map_err(|e| ProviderError::Cache(e.to_string()))
                })
            })
        })?;
        serde_json::from_str(&raw).map_err(|e| ProviderError::MalformedResponse(format!("cached search results: {e}")))
    }
}
