use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BackendError, ConfidenceMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CacheRecord {
    Confidence { value: f64, raw: String, method: ConfidenceMethod },
    Generation { text: Option<String> },
}

#[derive(Serialize, Deserialize)]
struct Line {
    key: String,
    record: CacheRecord,
}

type Slot = Arc<Mutex<Option<CacheRecord>>>;

/// Key/record store with an optional append-only JSON-lines file behind it.
///
/// Each key has its own slot lock, so concurrent requests for the same key
/// make one source call and the rest wait for its result.
#[derive(Debug)]
pub struct Cache {
    slots: Mutex<HashMap<String, Slot>>,
    file: Option<Mutex<File>>,
}

impl Cache {
    pub fn in_memory() -> Self {
        Cache { slots: Mutex::new(HashMap::new()), file: None }
    }

    /// Loads existing records from `path` (if present) and appends new ones to it.
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let mut slots = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Line>(&line) {
                    Ok(l) => {
                        slots.insert(l.key, Arc::new(Mutex::new(Some(l.record))));
                    }
                    // A torn final write is tolerated; the entry is simply refetched.
                    Err(e) => log::warn!("skipping unreadable cache line {} in {}: {e}", n + 1, path.display()),
                }
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let len = file.metadata()?.len();
        if len > 0 {
            let bytes = std::fs::read(path)?;
            if bytes.last() != Some(&b'\n') {
                writeln!(file)?;
            }
        }
        Ok(Cache { slots: Mutex::new(slots), file: Some(Mutex::new(file)) })
    }

    pub fn len(&self) -> usize {
        self.slots
            .lock()
            .expect("cache poisoned")
            .values()
            .filter(|s| s.lock().expect("slot poisoned").is_some())
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the cached record (and `true`) or computes, stores and returns
    /// it (and `false`). Failed computations are not cached.
    pub fn get_or_try_insert(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<CacheRecord, BackendError>,
    ) -> Result<(CacheRecord, bool), BackendError> {
        let slot = {
            let mut slots = self.slots.lock().expect("cache poisoned");
            slots.entry(key.to_string()).or_default().clone()
        };
        let mut guard = slot.lock().expect("slot poisoned");
        if let Some(record) = guard.as_ref() {
            return Ok((record.clone(), true));
        }
        let record = compute()?;
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&Line { key: key.to_string(), record: record.clone() })
                .expect("cache record serializes");
            let mut f = file.lock().expect("cache file poisoned");
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        *guard = Some(record.clone());
        Ok((record, false))
    }
}
