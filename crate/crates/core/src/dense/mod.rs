//! Dense retrieval: embedding vectors, cosine similarity, and an
//! exhaustive-scan index.
//!
//! Corpora here are small (hundreds of paragraphs), so the index is a
//! plain id -> vector map scanned in full for every query. That keeps
//! rankings deterministic and exactly reproducible, which matters more
//! than speed at this scale.

mod cache;
mod provider;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::sparse::ScoredList;

pub use cache::CachedEmbedder;
pub use provider::{
    embed, provider_from_config, DeterministicEmbedder, EmbeddingProvider, EmbeddingProviderConfig,
    RemoteHttpEmbedder,
};

/// A finite, nonzero-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty embedding vector".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding vector has non-finite entries".to_string(),
            ));
        }
        let v = EmbeddingVector { values };
        if v.norm() == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Vec<f64> {
        v.values
    }
}

/// Cosine similarity, clamped to [-1, 1] against rounding drift.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Paragraph embeddings for one corpus, tagged with the producing model.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    vectors: BTreeMap<String, EmbeddingVector>,
    dim: usize,
    model_id: String,
}

/// Embed every paragraph of the corpus through `provider`.
///
/// Provider calls are batched ([`EmbeddingProvider::batch_hint`]); a
/// failing batch is reported with the id of its first paragraph.
pub fn build_dense_index(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<DenseIndex> {
    if corpus.n_paragraphs() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let paragraphs: Vec<_> = corpus.paragraphs().collect();
    let mut vectors = BTreeMap::new();
    for batch in paragraphs.chunks(provider.batch_hint().max(1)) {
        let texts: Vec<String> = batch.iter().map(|p| p.text.clone()).collect();
        let embedded = embed(provider, &texts).map_err(|e| match e {
            Error::Provider {
                status,
                retries,
                message,
            } => Error::Provider {
                status,
                retries,
                message: format!("while embedding paragraph `{}`: {message}", batch[0].id),
            },
            other => other,
        })?;
        for (p, v) in batch.iter().zip(embedded) {
            vectors.insert(p.id.clone(), v);
        }
    }
    Ok(DenseIndex {
        dim: provider.dim(),
        model_id: provider.model_id().to_string(),
        vectors,
    })
}

impl DenseIndex {
    pub fn from_vectors(
        vectors: BTreeMap<String, EmbeddingVector>,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        let mut dims = vectors.values().map(EmbeddingVector::dim);
        let Some(dim) = dims.next() else {
            return Err(Error::EmptyCorpus);
        };
        if let Some(bad) = dims.find(|&d| d != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad,
            });
        }
        Ok(DenseIndex {
            vectors,
            dim,
            model_id: model_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, paragraph_id: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(paragraph_id)
    }

    /// Top-k by cosine similarity over the whole index (exhaustive scan).
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<ScoredList> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".to_string()));
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let mut entries = Vec::with_capacity(self.vectors.len());
        for (id, v) in &self.vectors {
            entries.push((id.clone(), cosine_similarity(query, v)?));
        }
        Ok(ScoredList::from_unsorted(entries).truncated(k))
    }

    /// Persist as line-delimited JSON: a header with (dim, model_id,
    /// count), then one record per paragraph in id order. Reloading
    /// reproduces identical similarities bit for bit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = serde_json::json!({
            "format": DENSE_FORMAT,
            "version": DENSE_VERSION,
            "dim": self.dim,
            "model_id": self.model_id,
            "count": self.vectors.len(),
        });
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for (id, v) in &self.vectors {
            let record = VectorRecord {
                id: id.clone(),
                values: v.values().to_vec(),
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<DenseIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        let at = |lineno: usize| format!("{}:{}", path.display(), lineno + 1);

        let (lineno, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path.display().to_string(), "empty vector store"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let header: serde_json::Value =
            serde_json::from_str(&header).map_err(|e| Error::parse(at(lineno), e.to_string()))?;
        if header["format"] != DENSE_FORMAT || header["version"] != DENSE_VERSION {
            return Err(Error::parse(
                at(lineno),
                format!("expected {DENSE_FORMAT} v{DENSE_VERSION} header"),
            ));
        }
        let dim = header["dim"]
            .as_u64()
            .ok_or_else(|| Error::parse(at(lineno), "missing dim"))? as usize;
        let model_id = header["model_id"]
            .as_str()
            .ok_or_else(|| Error::parse(at(lineno), "missing model_id"))?
            .to_string();
        let count = header["count"]
            .as_u64()
            .ok_or_else(|| Error::parse(at(lineno), "missing count"))? as usize;

        let mut vectors = BTreeMap::new();
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: VectorRecord =
                serde_json::from_str(&line).map_err(|e| Error::parse(at(lineno), e.to_string()))?;
            let vector = EmbeddingVector::new(record.values)?;
            if vector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: vector.dim(),
                });
            }
            vectors.insert(record.id, vector);
        }
        if vectors.len() != count {
            return Err(Error::parse(
                path.display().to_string(),
                format!("header count {count} != {} records", vectors.len()),
            ));
        }
        Ok(DenseIndex {
            vectors,
            dim,
            model_id,
        })
    }
}

const DENSE_FORMAT: &str = "dense-index";
const DENSE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VectorRecord {
    id: String,
    values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let a = vec_of(&[0.3, -1.2, 4.0]);
        let sim = cosine_similarity(&a, &a).unwrap();
        assert!((sim - 1.0).abs() < 1e-12);
        assert!(sim <= 1.0, "clamp holds");
    }

    #[test]
    fn cosine_of_orthogonal_unit_vectors_is_zero() {
        let a = vec_of(&[1.0, 0.0]);
        let b = vec_of(&[0.0, 1.0]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_computed_value() {
        // (1,2,3).(4,5,6) = 32; norms sqrt(14), sqrt(77).
        let a = vec_of(&[1.0, 2.0, 3.0]);
        let b = vec_of(&[4.0, 5.0, 6.0]);
        let expected = 32.0 / (14.0_f64.sqrt() * 77.0_f64.sqrt());
        assert!((cosine_similarity(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cosine_dimension_mismatch_is_an_error() {
        let a = vec_of(&[1.0, 2.0]);
        let b = vec_of(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            cosine_similarity(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_norm_vectors_are_rejected_at_construction() {
        assert!(matches!(
            EmbeddingVector::new(vec![0.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
    }

    #[test]
    fn search_full_k_returns_every_id_once() {
        let mut vectors = BTreeMap::new();
        for i in 0..7 {
            let mut values = vec![0.1; 4];
            values[i % 4] += i as f64;
            vectors.insert(format!("p{i}"), vec_of(&values));
        }
        let index = DenseIndex::from_vectors(vectors, "test").unwrap();
        let result = index.search(&vec_of(&[1.0, 0.5, 0.25, 0.125]), 7).unwrap();
        let mut ids: Vec<&str> = result.iter().map(|(id, _)| id.as_str()).collect();
        ids.sort_unstable();
        assert_eq!(ids, ["p0", "p1", "p2", "p3", "p4", "p5", "p6"]);
    }

    #[test]
    fn exact_match_ranks_first_with_score_one() {
        let mut vectors = BTreeMap::new();
        vectors.insert("a".to_string(), vec_of(&[1.0, 0.0, 0.0]));
        vectors.insert("b".to_string(), vec_of(&[0.0, 1.0, 0.0]));
        let index = DenseIndex::from_vectors(vectors, "test").unwrap();
        let result = index.search(&vec_of(&[1.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!(result.top().unwrap().0, "a");
        assert_eq!(result.top().unwrap().1, 1.0);
    }

    #[test]
    fn search_rejects_dim_mismatch() {
        let mut vectors = BTreeMap::new();
        vectors.insert("a".to_string(), vec_of(&[1.0, 0.0]));
        let index = DenseIndex::from_vectors(vectors, "test").unwrap();
        assert!(index.search(&vec_of(&[1.0, 0.0, 0.0]), 1).is_err());
    }

    #[test]
    fn save_load_reproduces_similarities_bit_for_bit() {
        let mut vectors = BTreeMap::new();
        for i in 0..5 {
            let values: Vec<f64> = (0..6).map(|j| ((i * 31 + j * 17) as f64).sin()).collect();
            vectors.insert(format!("p{i}"), EmbeddingVector::new(values).unwrap());
        }
        let index = DenseIndex::from_vectors(vectors, "model-x").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.jsonl");
        index.save(&path).unwrap();
        let reloaded = DenseIndex::load(&path).unwrap();
        assert_eq!(index, reloaded);

        let q = vec_of(&[0.4, -0.2, 0.9, 0.1, -0.5, 0.3]);
        let a = index.search(&q, 5).unwrap();
        let b = reloaded.search(&q, 5).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1.to_bits(), y.1.to_bits());
        }
    }
}
