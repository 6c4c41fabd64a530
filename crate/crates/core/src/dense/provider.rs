//! Embedding providers: a remote HTTP backend, a deterministic offline
//! backend for tests, and config-driven construction.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, TokenizerKind};
use crate::dense::{CachedEmbedder, EmbeddingVector};
use crate::error::{Error, Result};

/// A source of embeddings. Implementations must be order-preserving:
/// vector `i` of the result embeds text `i` of the batch.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Embed one batch. Callers are expected to respect
    /// [`EmbeddingProvider::batch_hint`] when splitting larger inputs.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    /// Preferred maximum batch size.
    fn batch_hint(&self) -> usize {
        64
    }
}

/// Embed `texts` through `provider`, validating the provider contract:
/// non-empty input, one vector per text, and the configured dimension.
pub fn embed(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("no texts to embed".to_string()));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(Error::InvalidInput(format!("text {i} is empty")));
    }
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(provider.batch_hint().max(1)) {
        let vectors = provider.embed_batch(batch)?;
        if vectors.len() != batch.len() {
            return Err(Error::Provider {
                status: None,
                retries: 0,
                message: format!(
                    "provider returned {} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                ),
            });
        }
        for v in &vectors {
            if v.dim() != provider.dim() {
                return Err(Error::DimensionMismatch {
                    expected: provider.dim(),
                    actual: v.dim(),
                });
            }
        }
        out.extend(vectors);
    }
    Ok(out)
}

/// Declarative provider selection, embeddable in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingProviderConfig {
    RemoteHttp {
        endpoint: String,
        model_id: String,
        dim: usize,
        #[serde(default = "default_embedding_key_env")]
        api_key_env: String,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
    },
    DeterministicTest {
        dim: usize,
        #[serde(default)]
        model_id: Option<String>,
    },
    /// Content-addressed cache in front of an optional inner provider.
    /// Without an inner provider every cache miss is an error, so runs
    /// can never silently fall through to a live backend.
    Cached {
        cache_dir: std::path::PathBuf,
        #[serde(default)]
        inner: Option<Box<EmbeddingProviderConfig>>,
        /// Required when `inner` is absent.
        #[serde(default)]
        model_id: Option<String>,
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn default_embedding_key_env() -> String {
    "EMBEDDING_API_KEY".to_string()
}

fn default_batch_size() -> usize {
    64
}

fn default_max_retries() -> u32 {
    2
}

pub fn provider_from_config(
    config: &EmbeddingProviderConfig,
) -> Result<Box<dyn EmbeddingProvider>> {
    match config {
        EmbeddingProviderConfig::RemoteHttp {
            endpoint,
            model_id,
            dim,
            api_key_env,
            batch_size,
            max_retries,
        } => {
            if *dim == 0 {
                return Err(Error::Config("embedding dim must be >= 1".to_string()));
            }
            Ok(Box::new(RemoteHttpEmbedder::new(
                endpoint.clone(),
                model_id.clone(),
                *dim,
                api_key_env.clone(),
                *batch_size,
                *max_retries,
            )))
        }
        EmbeddingProviderConfig::DeterministicTest { dim, model_id } => {
            if *dim == 0 {
                return Err(Error::Config("embedding dim must be >= 1".to_string()));
            }
            Ok(Box::new(match model_id {
                Some(id) => DeterministicEmbedder::with_model_id(*dim, id.clone()),
                None => DeterministicEmbedder::new(*dim),
            }))
        }
        EmbeddingProviderConfig::Cached {
            cache_dir,
            inner,
            model_id,
            dim,
        } => {
            let inner_provider = inner
                .as_ref()
                .map(|c| provider_from_config(c))
                .transpose()?;
            match inner_provider {
                Some(p) => Ok(Box::new(CachedEmbedder::new(cache_dir.clone(), p)?)),
                None => {
                    let (Some(model_id), Some(dim)) = (model_id, dim) else {
                        return Err(Error::Config(
                            "cache-only embedding config needs model_id and dim".to_string(),
                        ));
                    };
                    Ok(Box::new(CachedEmbedder::cache_only(
                        cache_dir.clone(),
                        model_id.clone(),
                        *dim,
                    )?))
                }
            }
        }
    }
}

/// Offline embedder: token unigrams and adjacent bigrams (plus the raw
/// text itself) are hashed into `dim` signed buckets, then L2-normalized.
/// The vectors carry no semantics, but they are pure functions of
/// `(model_id, text)` and identical on every platform, which makes the
/// full retrieval pipeline testable without a network.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dim: usize,
    model_id: String,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize) -> Self {
        DeterministicEmbedder::with_model_id(dim, format!("deterministic-test-{dim}"))
    }

    pub fn with_model_id(dim: usize, model_id: String) -> Self {
        assert!(dim >= 1, "embedding dim must be >= 1");
        DeterministicEmbedder { dim, model_id }
    }

    fn bucket_of(&self, item: &str) -> (usize, f64) {
        let mut hasher = Sha256::new();
        hasher.update(self.model_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(item.as_bytes());
        let digest = hasher.finalize();
        let h = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
        let bucket = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let tokens = tokenize(text, &TokenizerKind::WordLower).expect("word_lower never fails");
        let mut buckets = vec![0.0f64; self.dim];
        let mut add = |item: &str| {
            let (bucket, sign) = self.bucket_of(item);
            buckets[bucket] += sign;
        };
        add(text);
        for token in &tokens {
            add(token);
        }
        for pair in tokens.windows(2) {
            add(&format!("{}\u{1f}{}", pair[0], pair[1]));
        }
        let norm = buckets.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Hash cancellation wiped everything out; fall back to the
            // raw-text bucket alone so the norm is always positive.
            buckets = vec![0.0; self.dim];
            let (bucket, sign) = self.bucket_of(text);
            buckets[bucket] = sign;
            return EmbeddingVector::new(buckets).expect("single bucket is nonzero");
        }
        for v in &mut buckets {
            *v /= norm;
        }
        EmbeddingVector::new(buckets).expect("normalized vector is finite and nonzero")
    }
}

impl EmbeddingProvider for DeterministicEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// HTTP embedding backend. Sends a bearer-authenticated JSON request
/// `{"model": ..., "input": [texts]}` and expects same-order vectors in
/// `{"data": [{"embedding": [...]}]}`. Shapes in docs/formats.md.
pub struct RemoteHttpEmbedder {
    endpoint: String,
    model_id: String,
    dim: usize,
    api_key_env: String,
    batch_size: usize,
    max_retries: u32,
    agent: ureq::Agent,
}

impl RemoteHttpEmbedder {
    pub fn new(
        endpoint: String,
        model_id: String,
        dim: usize,
        api_key_env: String,
        batch_size: usize,
        max_retries: u32,
    ) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        RemoteHttpEmbedder {
            endpoint,
            model_id,
            dim,
            api_key_env,
            batch_size,
            max_retries,
            agent,
        }
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env).map_err(|_| {
            Error::Config(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))
        })
    }

    fn call_once(
        &self,
        texts: &[String],
        key: &str,
    ) -> std::result::Result<Vec<EmbeddingVector>, (Option<u16>, String)> {
        let body = serde_json::json!({
            "model": self.model_id,
            "input": texts,
        });
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => (Some(code), format!("HTTP status {code}")),
                ureq::Error::Transport(t) => (None, t.to_string()),
            })?;
        let value: serde_json::Value = response
            .into_json()
            .map_err(|e| (None, format!("invalid JSON response: {e}")))?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| (None, "response missing data array".to_string()))?;
        let mut vectors = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let raw = item["embedding"]
                .as_array()
                .ok_or_else(|| (None, format!("data[{i}] missing embedding")))?;
            let values: Option<Vec<f64>> = raw.iter().map(serde_json::Value::as_f64).collect();
            let values =
                values.ok_or_else(|| (None, format!("data[{i}] has non-numeric entries")))?;
            let vector =
                EmbeddingVector::new(values).map_err(|e| (None, format!("data[{i}]: {e}")))?;
            vectors.push(vector);
        }
        Ok(vectors)
    }
}

impl EmbeddingProvider for RemoteHttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn batch_hint(&self) -> usize {
        self.batch_size.max(1)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let key = self.api_key()?;
        let mut last: (Option<u16>, String) = (None, "no attempt made".to_string());
        for attempt in 0..=self.max_retries {
            match self.call_once(texts, &key) {
                Ok(vectors) => return Ok(vectors),
                Err(e) => last = e,
            }
            let _ = attempt;
        }
        Err(Error::Provider {
            status: last.0,
            retries: self.max_retries,
            message: last.1,
        })
    }
}
