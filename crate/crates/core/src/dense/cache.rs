//! Content-addressed embedding cache.
//!
//! Entries are keyed by `sha256(model_id, text)` and stored one file per
//! key, so the cache survives restarts and concurrent inserts of distinct
//! keys never collide. Writes go through a temp file and an atomic rename.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

/// Cache key for `(model_id, text)`: length-framed SHA-256, hex-encoded.
pub fn cache_key(model_id: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update((model_id.len() as u64).to_le_bytes());
    hasher.update(model_id.as_bytes());
    hasher.update((text.len() as u64).to_le_bytes());
    hasher.update(text.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    model_id: String,
    dim: usize,
    values: Vec<f64>,
}

/// A cache in front of an optional inner provider. With no inner
/// provider, a miss is a hard error carrying the missing key — useful
/// for strictly-offline runs.
pub struct CachedEmbedder {
    cache_dir: PathBuf,
    inner: Option<Box<dyn EmbeddingProvider>>,
    model_id: String,
    dim: usize,
}

impl CachedEmbedder {
    pub fn new(cache_dir: PathBuf, inner: Box<dyn EmbeddingProvider>) -> Result<Self> {
        std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
        Ok(CachedEmbedder {
            model_id: inner.model_id().to_string(),
            dim: inner.dim(),
            cache_dir,
            inner: Some(inner),
        })
    }

    pub fn cache_only(cache_dir: PathBuf, model_id: String, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be >= 1".to_string()));
        }
        std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
        Ok(CachedEmbedder {
            cache_dir,
            inner: None,
            model_id,
            dim,
        })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.cache_dir.join(format!("{key}.json"))
    }

    fn read_entry(&self, key: &str) -> Result<Option<EmbeddingVector>> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        if entry.model_id != self.model_id {
            return Err(Error::parse(
                path.display().to_string(),
                format!("cache entry is for model `{}`", entry.model_id),
            ));
        }
        if entry.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: entry.dim,
            });
        }
        EmbeddingVector::new(entry.values).map(Some)
    }

    fn write_entry(&self, key: &str, vector: &EmbeddingVector) -> Result<()> {
        let entry = CacheEntry {
            model_id: self.model_id.clone(),
            dim: vector.dim(),
            values: vector.values().to_vec(),
        };
        let path = self.entry_path(key);
        let tmp = self
            .cache_dir
            .join(format!("{key}.tmp.{}", std::process::id()));
        let bytes = serde_json::to_vec(&entry)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

impl EmbeddingProvider for CachedEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn batch_hint(&self) -> usize {
        self.inner.as_ref().map_or(64, |p| p.batch_hint())
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| cache_key(&self.model_id, t)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<usize> = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            let hit = self.read_entry(key)?;
            if hit.is_none() {
                missing.push(i);
            }
            out.push(hit);
        }
        if !missing.is_empty() {
            let Some(inner) = &self.inner else {
                return Err(Error::CacheMiss {
                    key: keys[missing[0]].clone(),
                });
            };
            let miss_texts: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let vectors = inner.embed_batch(&miss_texts)?;
            if vectors.len() != miss_texts.len() {
                return Err(Error::Provider {
                    status: None,
                    retries: 0,
                    message: format!(
                        "inner provider returned {} vectors for {} texts",
                        vectors.len(),
                        miss_texts.len()
                    ),
                });
            }
            for (&i, vector) in missing.iter().zip(vectors) {
                self.write_entry(&keys[i], &vector)?;
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
