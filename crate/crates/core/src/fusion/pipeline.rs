//! End-to-end hybrid search over one corpus: retrieve per-method pools,
//! pick alpha (fixed or judged), fuse.

use crate::corpus::Corpus;
use crate::dense::{embed, DenseIndex, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::fusion::{compute_alpha, fuse, AlphaValue};
use crate::judge::{Judge, JudgeVerdict};
use crate::sparse::{InvertedIndex, ScoredList};

/// Outcome of one hybrid query.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    pub ranking: ScoredList,
    pub alpha_used: AlphaValue,
    pub verdict: Option<JudgeVerdict>,
    pub dense_top1: Option<String>,
    pub bm25_top1: Option<String>,
}

/// Immutable bundle of everything a query needs: the corpus (for
/// paragraph texts), both indexes, and the query-side embedder.
pub struct HybridPipeline<'a> {
    corpus: &'a Corpus,
    sparse: &'a InvertedIndex,
    dense: &'a DenseIndex,
    embedder: &'a dyn EmbeddingProvider,
}

impl<'a> HybridPipeline<'a> {
    pub fn new(
        corpus: &'a Corpus,
        sparse: &'a InvertedIndex,
        dense: &'a DenseIndex,
        embedder: &'a dyn EmbeddingProvider,
    ) -> Result<Self> {
        if embedder.dim() != dense.dim() {
            return Err(Error::DimensionMismatch {
                expected: dense.dim(),
                actual: embedder.dim(),
            });
        }
        if embedder.model_id() != dense.model_id() {
            return Err(Error::Config(format!(
                "query embedder `{}` does not match index model `{}`",
                embedder.model_id(),
                dense.model_id()
            )));
        }
        Ok(HybridPipeline {
            corpus,
            sparse,
            dense,
            embedder,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    /// Top-`pool_n` candidates from each method: `(dense, bm25)`.
    pub fn pools(&self, query_text: &str, pool_n: usize) -> Result<(ScoredList, ScoredList)> {
        if pool_n == 0 {
            return Err(Error::InvalidInput("pool_n must be at least 1".to_string()));
        }
        let query_vector = embed(self.embedder, &[query_text.to_string()])?
            .pop()
            .expect("one vector per text");
        let dense_pool = self.dense.search(&query_vector, pool_n)?;
        let bm25_pool = self.sparse.search(query_text, pool_n)?;
        Ok((dense_pool, bm25_pool))
    }

    /// Hybrid search at a constant alpha.
    pub fn search_fixed(
        &self,
        query_text: &str,
        alpha: AlphaValue,
        k: usize,
        pool_n: usize,
    ) -> Result<HybridResult> {
        check_k_pool(k, pool_n)?;
        let (dense_pool, bm25_pool) = self.pools(query_text, pool_n)?;
        let ranking = fuse(&dense_pool, &bm25_pool, alpha, k);
        Ok(HybridResult {
            ranking,
            alpha_used: alpha,
            verdict: None,
            dense_top1: dense_pool.top().map(|(id, _)| id.clone()),
            bm25_top1: bm25_pool.top().map(|(id, _)| id.clone()),
        })
    }

    /// Hybrid search with a per-query alpha from the judge.
    ///
    /// The judge sees the text of each method's top-1 candidate. An empty
    /// BM25 pool short-circuits to alpha 1.0 without judging (there is
    /// nothing to weigh); an empty dense pool, impossible with an
    /// exhaustive dense scan but kept for safety, maps to 0.0.
    pub fn search_dat(
        &self,
        query_text: &str,
        gold_text: Option<&str>,
        judge: &Judge,
        k: usize,
        pool_n: usize,
    ) -> Result<HybridResult> {
        check_k_pool(k, pool_n)?;
        let (dense_pool, bm25_pool) = self.pools(query_text, pool_n)?;
        let (alpha, verdict) =
            self.judged_alpha(query_text, gold_text, judge, &dense_pool, &bm25_pool)?;
        let ranking = fuse(&dense_pool, &bm25_pool, alpha, k);
        Ok(HybridResult {
            ranking,
            alpha_used: alpha,
            verdict,
            dense_top1: dense_pool.top().map(|(id, _)| id.clone()),
            bm25_top1: bm25_pool.top().map(|(id, _)| id.clone()),
        })
    }

    /// The DAT alpha decision for already-retrieved pools. Shared by
    /// `search_dat` and the evaluation harness so both always agree.
    pub fn judged_alpha(
        &self,
        query_text: &str,
        gold_text: Option<&str>,
        judge: &Judge,
        dense_pool: &ScoredList,
        bm25_pool: &ScoredList,
    ) -> Result<(AlphaValue, Option<JudgeVerdict>)> {
        let dense_top = dense_pool.top();
        let bm25_top = bm25_pool.top();
        match (dense_top, bm25_top) {
            (None, None) => Ok((AlphaValue::HALF, None)),
            (Some(_), None) => Ok((AlphaValue::ONE, None)),
            (None, Some(_)) => Ok((AlphaValue::ZERO, None)),
            (Some((dense_id, _)), Some((bm25_id, _))) => {
                let dense_text = self.paragraph_text(dense_id)?;
                let bm25_text = self.paragraph_text(bm25_id)?;
                let verdict = judge.judge(query_text, dense_text, bm25_text, gold_text)?;
                let alpha = compute_alpha(verdict.s_dense, verdict.s_bm25);
                Ok((alpha, Some(verdict)))
            }
        }
    }

    fn paragraph_text(&self, id: &str) -> Result<&str> {
        self.corpus
            .paragraph(id)
            .map(|p| p.text.as_str())
            .ok_or_else(|| Error::ParagraphNotFound { id: id.to_string() })
    }
}

fn check_k_pool(k: usize, pool_n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".to_string()));
    }
    if pool_n < k {
        return Err(Error::InvalidInput(format!(
            "pool_n ({pool_n}) must be >= k ({k})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LanguageTag, Paragraph, QueryRecord, TokenizerKind};
    use crate::dense::{build_dense_index, DeterministicEmbedder};
    use crate::judge::JudgeConfig;
    use crate::sparse::{build_index, Bm25Params};

    fn tiny_corpus() -> Corpus {
        let texts = [
            ("p0", "the amber lighthouse stands on the cliff"),
            ("p1", "a silver compass points toward the bridge"),
            ("p2", "granite stones line the old harbor wall"),
            ("p3", "the keeper lights the amber lamp at dusk"),
        ];
        let paragraphs = texts
            .iter()
            .map(|(id, text)| Paragraph {
                id: id.to_string(),
                article_id: "art".to_string(),
                text: text.to_string(),
            })
            .collect();
        let queries = vec![QueryRecord {
            id: "q0".to_string(),
            text: "where is the amber lighthouse".to_string(),
            gold_paragraph_id: "p0".to_string(),
        }];
        Corpus::new(paragraphs, queries, LanguageTag::English).unwrap()
    }

    struct Fixture {
        corpus: Corpus,
        sparse: InvertedIndex,
        dense: DenseIndex,
        embedder: DeterministicEmbedder,
    }

    impl Fixture {
        fn new() -> Self {
            let corpus = tiny_corpus();
            let embedder = DeterministicEmbedder::new(32);
            let sparse =
                build_index(&corpus, TokenizerKind::WordLower, Bm25Params::default()).unwrap();
            let dense = build_dense_index(&corpus, &embedder).unwrap();
            Fixture {
                corpus,
                sparse,
                dense,
                embedder,
            }
        }

        fn pipeline(&self) -> HybridPipeline<'_> {
            HybridPipeline::new(&self.corpus, &self.sparse, &self.dense, &self.embedder).unwrap()
        }
    }

    #[test]
    fn fixed_judge_drives_alpha_regardless_of_texts() {
        let fixture = Fixture::new();
        let judge = Judge::from_config(&JudgeConfig::Fixed {
            s_dense: 3,
            s_bm25: 4,
        })
        .unwrap();
        let result = fixture
            .pipeline()
            .search_dat("amber lighthouse", None, &judge, 4, 4)
            .unwrap();
        assert_eq!(result.alpha_used.value(), 0.4);
        assert!(result.verdict.is_some());
    }

    #[test]
    fn oracle_exclusive_preference_puts_gold_first() {
        let fixture = Fixture::new();
        let pipeline = fixture.pipeline();
        let judge = Judge::Oracle;
        let query = &fixture.corpus.queries()[0];
        let gold_text = fixture
            .corpus
            .paragraph(&query.gold_paragraph_id)
            .unwrap()
            .text
            .clone();
        let result = pipeline
            .search_dat(&query.text, Some(&gold_text), &judge, 4, 4)
            .unwrap();
        // If exactly one method's top-1 is the gold text, the verdict is
        // an exclusive preference and the gold paragraph leads the fused
        // ranking.
        let dense_is_gold = result.dense_top1.as_deref() == Some("p0");
        let bm25_is_gold = result.bm25_top1.as_deref() == Some("p0");
        if dense_is_gold != bm25_is_gold {
            let expected = if dense_is_gold {
                AlphaValue::ONE
            } else {
                AlphaValue::ZERO
            };
            assert_eq!(result.alpha_used, expected);
            assert_eq!(result.ranking.top().unwrap().0, "p0");
        }
    }

    #[test]
    fn fallback_verdict_maps_to_neutral_alpha() {
        let fixture = Fixture::new();
        let transport = crate::judge::ScriptedTransport::of_texts(&["junk", "junk", "junk"]);
        let remote = crate::judge::RemoteJudge::new(Box::new(transport), 2, false);
        let judge = Judge::Remote(remote);
        let result = fixture
            .pipeline()
            .search_dat("amber lighthouse", None, &judge, 4, 4)
            .unwrap();
        assert_eq!(result.alpha_used, AlphaValue::HALF);
        assert!(result.verdict.unwrap().is_fallback);
    }

    #[test]
    fn empty_bm25_pool_short_circuits_to_dense() {
        let fixture = Fixture::new();
        let judge = Judge::from_config(&JudgeConfig::Fixed {
            s_dense: 0,
            s_bm25: 5,
        })
        .unwrap();
        // No query token appears in the corpus, so the BM25 pool is empty
        // and the judge is never consulted.
        let result = fixture
            .pipeline()
            .search_dat("zzz qqq xxx", None, &judge, 4, 4)
            .unwrap();
        assert_eq!(result.alpha_used, AlphaValue::ONE);
        assert!(result.verdict.is_none());
        assert!(result.bm25_top1.is_none());
        assert_eq!(result.ranking.len(), 4);
    }

    #[test]
    fn pool_must_cover_k() {
        let fixture = Fixture::new();
        let err = fixture
            .pipeline()
            .search_fixed("amber", AlphaValue::HALF, 10, 5);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mismatched_embedder_is_rejected() {
        let fixture = Fixture::new();
        let other = DeterministicEmbedder::new(16);
        let err = HybridPipeline::new(&fixture.corpus, &fixture.sparse, &fixture.dense, &other);
        assert!(err.is_err());
    }
}
