//! Evaluation corpora: aligned (query, gold paragraph) pairs.
//!
//! A [`Corpus`] is loaded from a SQuAD-layout JSON document
//! ([`load_squad_format`]) or from the native line-delimited format
//! (`save_native` / `load_native`), optionally down-sampled to a question
//! budget with [`sample_corpus`]. Corpora are immutable after
//! construction and safe to share across threads.

mod squad;
pub mod tokenizer;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use squad::load_squad_format;
pub use tokenizer::{tokenize, TokenizerKind};

/// One retrievable unit of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub article_id: String,
    pub text: String,
}

/// A question plus the id of the paragraph that answers it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    pub gold_paragraph_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LanguageTag {
    #[default]
    English,
    Cjk,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    paragraphs: BTreeMap<String, Paragraph>,
    queries: Vec<QueryRecord>,
    language_tag: LanguageTag,
}

impl Corpus {
    /// Build a corpus, validating the structural invariants: unique
    /// paragraph ids, non-empty texts, every query grounded in an
    /// existing paragraph, and unique query ids.
    pub fn new(
        paragraphs: Vec<Paragraph>,
        queries: Vec<QueryRecord>,
        language_tag: LanguageTag,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in paragraphs {
            if p.text.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "paragraph `{}` has empty text",
                    p.id
                )));
            }
            let id = p.id.clone();
            if map.insert(p.id.clone(), p).is_some() {
                return Err(Error::DuplicateId { id });
            }
        }
        let mut seen_query_ids = std::collections::HashSet::new();
        for q in &queries {
            if q.text.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "query `{}` has empty text",
                    q.id
                )));
            }
            if !seen_query_ids.insert(q.id.clone()) {
                return Err(Error::DuplicateId { id: q.id.clone() });
            }
            if !map.contains_key(&q.gold_paragraph_id) {
                return Err(Error::InvalidInput(format!(
                    "query `{}` references missing paragraph `{}`",
                    q.id, q.gold_paragraph_id
                )));
            }
        }
        if !queries.is_empty() && map.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus {
            paragraphs: map,
            queries,
            language_tag,
        })
    }

    pub fn with_language_tag(mut self, tag: LanguageTag) -> Self {
        self.language_tag = tag;
        self
    }

    /// Paragraphs in ascending id order.
    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.paragraphs.values()
    }

    pub fn paragraph(&self, id: &str) -> Option<&Paragraph> {
        self.paragraphs.get(id)
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn language_tag(&self) -> LanguageTag {
        self.language_tag
    }

    pub fn n_paragraphs(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    /// Number of distinct article ids across paragraphs.
    pub fn n_articles(&self) -> usize {
        self.paragraphs
            .values()
            .map(|p| p.article_id.as_str())
            .collect::<std::collections::HashSet<_>>()
            .len()
    }

    /// Write the native line-delimited format: one `meta` record, then
    /// `paragraph` records in id order, then `query` records in corpus
    /// order. See docs/formats.md.
    pub fn save_native(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = |record: &NativeRecord| -> Result<()> {
            let line = serde_json::to_string(record)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))
        };
        emit(&NativeRecord::Meta {
            language_tag: self.language_tag,
        })?;
        for p in self.paragraphs.values() {
            emit(&NativeRecord::Paragraph {
                id: p.id.clone(),
                article_id: p.article_id.clone(),
                text: p.text.clone(),
            })?;
        }
        for q in &self.queries {
            emit(&NativeRecord::Query {
                id: q.id.clone(),
                text: q.text.clone(),
                gold_paragraph_id: q.gold_paragraph_id.clone(),
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Load the native format. The `meta` record is optional; without it
    /// the language tag defaults to English.
    pub fn load_native(path: &Path) -> Result<Corpus> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut language_tag = LanguageTag::English;
        let mut paragraphs = Vec::new();
        let mut queries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let at = format!("{}:{}", path.display(), lineno + 1);
            let record: NativeRecord =
                serde_json::from_str(&line).map_err(|e| Error::parse(at, e.to_string()))?;
            match record {
                NativeRecord::Meta { language_tag: tag } => language_tag = tag,
                NativeRecord::Paragraph {
                    id,
                    article_id,
                    text,
                } => paragraphs.push(Paragraph {
                    id,
                    article_id,
                    text,
                }),
                NativeRecord::Query {
                    id,
                    text,
                    gold_paragraph_id,
                } => queries.push(QueryRecord {
                    id,
                    text,
                    gold_paragraph_id,
                }),
            }
        }
        Corpus::new(paragraphs, queries, language_tag)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum NativeRecord {
    Meta {
        language_tag: LanguageTag,
    },
    Paragraph {
        id: String,
        article_id: String,
        text: String,
    },
    Query {
        id: String,
        text: String,
        gold_paragraph_id: String,
    },
}

/// Down-sample a corpus to at most `max_questions` questions by drawing
/// whole articles.
///
/// Article ids are shuffled in a seeded permutation (ChaCha20 stream,
/// Fisher-Yates shuffle — stable across platforms) and each article is
/// admitted iff taking all of its questions keeps the running total
/// within `max_questions`. Admitted articles contribute all of their
/// paragraphs. The result is deterministic for a fixed
/// `(corpus, max_questions, seed)` and maximal: no unadmitted article
/// could be added without exceeding the budget.
pub fn sample_corpus(corpus: &Corpus, max_questions: usize, seed: u64) -> Result<Corpus> {
    if max_questions == 0 {
        return Err(Error::InvalidInput(
            "max_questions must be at least 1".to_string(),
        ));
    }

    let mut question_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut article_ids: Vec<&str> = Vec::new();
    for p in corpus.paragraphs() {
        if question_count.insert(p.article_id.as_str(), 0).is_none() {
            article_ids.push(p.article_id.as_str());
        }
    }
    article_ids.sort_unstable();
    for q in corpus.queries() {
        if let Some(p) = corpus.paragraph(&q.gold_paragraph_id) {
            *question_count.entry(p.article_id.as_str()).or_insert(0) += 1;
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    article_ids.shuffle(&mut rng);

    let mut admitted: std::collections::HashSet<&str> = std::collections::HashSet::new();
    let mut total = 0usize;
    for article in article_ids {
        let n = question_count[article];
        if total + n <= max_questions {
            total += n;
            admitted.insert(article);
        }
    }

    let paragraphs: Vec<Paragraph> = corpus
        .paragraphs()
        .filter(|p| admitted.contains(p.article_id.as_str()))
        .cloned()
        .collect();
    let queries: Vec<QueryRecord> = corpus
        .queries()
        .iter()
        .filter(|q| {
            corpus
                .paragraph(&q.gold_paragraph_id)
                .is_some_and(|p| admitted.contains(p.article_id.as_str()))
        })
        .cloned()
        .collect();
    Corpus::new(paragraphs, queries, corpus.language_tag())
}
