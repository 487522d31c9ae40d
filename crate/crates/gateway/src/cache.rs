use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    text: String,
    vector: Vec<f64>,
}

/// Exact-text embedding cache. Reads are concurrent; misses are resolved
/// under one lock so each text goes over the wire at most once.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    map: RwLock<HashMap<String, Arc<Vec<f64>>>>,
    miss_lock: Mutex<()>,
    wire_texts: AtomicUsize,
    persist: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cache backed by a JSON-lines file, loaded now and appended on miss.
    pub fn persistent(path: &Path) -> Result<Self, GatewayError> {
        let mut map = HashMap::new();
        if path.exists() {
            let text =
                fs::read_to_string(path).map_err(|e| GatewayError::io(format!("reading {}", path.display()), e))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                match serde_json::from_str::<CacheLine>(line) {
                    Ok(entry) => {
                        map.insert(entry.text, Arc::new(entry.vector));
                    }
                    Err(e) => log::warn!("skipping bad cache line in {}: {e}", path.display()),
                }
            }
        }
        Ok(EmbeddingCache {
            map: RwLock::new(map),
            persist: Some(path.to_path_buf()),
            ..Self::default()
        })
    }

    pub fn get(&self, text: &str) -> Option<Arc<Vec<f64>>> {
        self.map.read().expect("cache lock").get(text).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of texts fetched from the backend so far.
    pub fn wire_texts(&self) -> usize {
        self.wire_texts.load(Ordering::SeqCst)
    }

    /// Returns cached vectors for `texts`, calling `fetch` once with the
    /// distinct missing texts (in first-seen order).
    pub fn get_or_fetch<F>(&self, texts: &[String], fetch: F) -> Result<Vec<Arc<Vec<f64>>>, GatewayError>
    where
        F: FnOnce(&[String]) -> Result<Vec<Vec<f64>>, GatewayError>,
    {
        if let Some(all) = self.lookup(texts) {
            return Ok(all);
        }
        let _guard = self.miss_lock.lock().expect("cache miss lock");
        let missing: Vec<String> = {
            let map = self.map.read().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .filter(|t| !map.contains_key(*t) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let vectors = fetch(&missing)?;
            self.wire_texts.fetch_add(missing.len(), Ordering::SeqCst);
            if let Some(path) = &self.persist {
                self.append_file(path, &missing, &vectors);
            }
            let mut map = self.map.write().expect("cache lock");
            for (text, vector) in missing.into_iter().zip(vectors) {
                map.insert(text, Arc::new(vector));
            }
        }
        Ok(self.lookup(texts).expect("all texts cached"))
    }

    fn lookup(&self, texts: &[String]) -> Option<Vec<Arc<Vec<f64>>>> {
        let map = self.map.read().expect("cache lock");
        texts.iter().map(|t| map.get(t).cloned()).collect()
    }

    fn append_file(&self, path: &Path, texts: &[String], vectors: &[Vec<f64>]) {
        let result = (|| -> std::io::Result<()> {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            for (text, vector) in texts.iter().zip(vectors) {
                let line = serde_json::to_string(&CacheLine {
                    text: text.clone(),
                    vector: vector.clone(),
                })
                .expect("cache line serializes");
                writeln!(file, "{line}")?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            log::warn!("embedding cache write to {} failed: {e}", path.display());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn misses_fetch_once_per_distinct_text() {
        let cache = EmbeddingCache::new();
        let texts: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let mut calls = Vec::new();
        let out = cache
            .get_or_fetch(&texts, |m| {
                calls.push(m.to_vec());
                Ok(m.iter().map(|t| vec![t.len() as f64]).collect())
            })
            .unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(calls, vec![vec!["a".to_string(), "b".to_string()]]);
        cache.get_or_fetch(&texts, |_| panic!("served from cache")).unwrap();
        assert_eq!(cache.wire_texts(), 2);
    }

    #[test]
    fn persistent_cache_survives_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        let cache = EmbeddingCache::persistent(&path).unwrap();
        cache
            .get_or_fetch(&["x".to_string()], |_| Ok(vec![vec![0.5, 0.5]]))
            .unwrap();
        let again = EmbeddingCache::persistent(&path).unwrap();
        assert_eq!(*again.get("x").unwrap(), vec![0.5, 0.5]);
    }
}
