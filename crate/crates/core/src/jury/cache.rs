use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{JuryError, Verdict};

/// Records that can be looked up in a [`JsonlCache`].
pub trait CacheKey {
    fn cache_key(&self) -> String;
}

impl CacheKey for Verdict {
    fn cache_key(&self) -> String {
        verdict_key(&self.item_id, &self.judge_id, &self.prompt_hash)
    }
}

pub(crate) fn verdict_key(item_id: &str, judge_id: &str, prompt_hash: &str) -> String {
    format!("{item_id}\t{judge_id}\t{prompt_hash}")
}

/// Append-only JSONL store. Existing lines are loaded on open, later lines
/// overriding earlier ones with the same key; new records are appended and
/// flushed one line at a time, so concurrent writers never interleave.
pub struct JsonlCache<T> {
    path: Option<PathBuf>,
    entries: Mutex<(HashMap<String, usize>, Vec<T>)>,
    file: Mutex<Option<File>>,
}

pub type VerdictCache = JsonlCache<Verdict>;

impl<T: CacheKey + Clone + Serialize + DeserializeOwned> JsonlCache<T> {
    pub fn in_memory() -> Self {
        JsonlCache {
            path: None,
            entries: Mutex::new((HashMap::new(), Vec::new())),
            file: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self, JuryError> {
        let err = |e: std::io::Error| JuryError::Cache(format!("{}: {e}", path.display()));
        let cache = JsonlCache {
            path: Some(path.to_path_buf()),
            entries: Mutex::new((HashMap::new(), Vec::new())),
            file: Mutex::new(None),
        };
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(err)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: T = serde_json::from_str(&line).map_err(|e| {
                    JuryError::Cache(format!("{}:{}: {e}", path.display(), n + 1))
                })?;
                cache.insert(record);
            }
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn insert(&self, record: T) {
        let mut guard = self.entries.lock().unwrap();
        let (index, records) = &mut *guard;
        let key = record.cache_key();
        match index.get(&key) {
            Some(&i) => records[i] = record,
            None => {
                index.insert(key, records.len());
                records.push(record);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<T> {
        let guard = self.entries.lock().unwrap();
        guard.0.get(key).map(|&i| guard.1[i].clone())
    }

    /// Every stored record, in first-insertion order.
    pub fn records(&self) -> Vec<T> {
        self.entries.lock().unwrap().1.clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, record: &T) -> Result<(), JuryError> {
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(record)
                .map_err(|e| JuryError::Cache(e.to_string()))?;
            line.push('\n');
            let err = |e: std::io::Error| JuryError::Cache(format!("{}: {e}", path.display()));
            let mut file = self.file.lock().unwrap();
            if file.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(err)?;
                }
                *file = Some(OpenOptions::new().create(true).append(true).open(path).map_err(err)?);
            }
            let f = file.as_mut().unwrap();
            f.write_all(line.as_bytes()).map_err(err)?;
            f.flush().map_err(err)?;
        }
        self.insert(record.clone());
        Ok(())
    }
}
