//! BM25 inverted index: construction, scoring, top-k search, persistence.
//!
//! Scoring follows the Okapi BM25 form with the non-negative IDF variant
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`, so scores never go negative and
//! min-max normalization downstream stays well-behaved. Query tokens are
//! scored with multiplicity: a term repeated in the query contributes one
//! summand per occurrence.
//!
//! The index is immutable after `build_index`; concurrent searches need
//! no synchronization.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, TokenizerKind};
use crate::error::{Error, Result};

/// BM25 tuning parameters. Defaults are k1 = 1.2, b = 0.75.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !k1.is_finite() || k1 < 0.0 {
            return Err(Error::InvalidInput(format!("k1 must be >= 0, got {k1}")));
        }
        if !b.is_finite() || !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidInput(format!("b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Ranked (paragraph_id, raw score) pairs, descending by score with ties
/// broken by ascending id. Shared by the sparse, dense, and fusion paths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredList {
    entries: Vec<(String, f64)>,
}

impl ScoredList {
    /// Sorts the entries into the canonical order. Panics on duplicate
    /// ids: constructors in this crate never produce them.
    pub fn from_unsorted(mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for w in entries.windows(2) {
            assert_ne!(w[0].0, w[1].0, "duplicate paragraph id in scored list");
        }
        ScoredList { entries }
    }

    pub fn empty() -> Self {
        ScoredList::default()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self) -> Option<&(String, f64)> {
        self.entries.first()
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }
}

/// Term postings plus the corpus statistics BM25 needs.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<(String, u32)>>,
    doc_len: BTreeMap<String, u32>,
    avgdl: f64,
    n_docs: usize,
    params: Bm25Params,
    tokenizer: TokenizerKind,
}

/// Tokenize every paragraph and accumulate postings, document lengths,
/// and the average document length.
pub fn build_index(
    corpus: &Corpus,
    tokenizer: TokenizerKind,
    params: Bm25Params,
) -> Result<InvertedIndex> {
    if corpus.n_paragraphs() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
    let mut doc_len: BTreeMap<String, u32> = BTreeMap::new();
    for paragraph in corpus.paragraphs() {
        let tokens = tokenize(&paragraph.text, &tokenizer)?;
        doc_len.insert(paragraph.id.clone(), tokens.len() as u32);
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings
                .entry(term.to_string())
                .or_default()
                .push((paragraph.id.clone(), count));
        }
    }
    let n_docs = doc_len.len();
    let avgdl = doc_len.values().map(|&l| f64::from(l)).sum::<f64>() / n_docs as f64;
    Ok(InvertedIndex {
        postings,
        doc_len,
        avgdl,
        n_docs,
        params,
        tokenizer,
    })
}

impl InvertedIndex {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn tokenizer(&self) -> &TokenizerKind {
        &self.tokenizer
    }

    pub fn doc_len(&self, paragraph_id: &str) -> Option<u32> {
        self.doc_len.get(paragraph_id).copied()
    }

    /// Number of documents containing `term`; 0 for unseen terms.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`. Strictly positive even at
    /// df = N.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_frequency(&self, term: &str, paragraph_id: &str) -> u32 {
        self.postings.get(term).map_or(0, |list| {
            list.binary_search_by(|(id, _)| id.as_str().cmp(paragraph_id))
                .map_or(0, |i| list[i].1)
        })
    }

    fn term_score(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let f = f64::from(tf);
        let len_norm = 1.0 - b + b * f64::from(doc_len) / self.avgdl;
        idf * (f * (k1 + 1.0)) / (f + k1 * len_norm)
    }

    /// BM25 score of one document for a tokenized query. Tokens absent
    /// from the document contribute 0.
    pub fn bm25_score(&self, query_tokens: &[String], paragraph_id: &str) -> Result<f64> {
        let Some(&doc_len) = self.doc_len.get(paragraph_id) else {
            return Err(Error::ParagraphNotFound {
                id: paragraph_id.to_string(),
            });
        };
        let mut score = 0.0;
        for token in query_tokens {
            let tf = self.term_frequency(token, paragraph_id);
            if tf > 0 {
                score += self.term_score(self.idf(token), tf, doc_len);
            }
        }
        Ok(score)
    }

    /// Top-k BM25 search. The candidate set is exactly the documents
    /// sharing at least one token with the query; zero-overlap documents
    /// are never listed.
    pub fn search(&self, query_text: &str, k: usize) -> Result<ScoredList> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".to_string()));
        }
        let query_tokens = tokenize(query_text, &self.tokenizer)?;
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for token in &query_tokens {
            if let Some(list) = self.postings.get(token.as_str()) {
                let idf = self.idf(token);
                for &(ref id, tf) in list {
                    let doc_len = self.doc_len[id];
                    *scores.entry(id.as_str()).or_insert(0.0) += self.term_score(idf, tf, doc_len);
                }
            }
        }
        let entries: Vec<(String, f64)> = scores
            .into_iter()
            .map(|(id, s)| (id.to_string(), s))
            .collect();
        Ok(ScoredList::from_unsorted(entries).truncated(k))
    }

    /// Persist as line-delimited JSON with a version header; reloading
    /// reproduces identical scores bit for bit. Layout in docs/formats.md.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = |record: &IndexRecord| -> Result<()> {
            let line = serde_json::to_string(record)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))
        };
        emit(&IndexRecord::Header {
            format: SPARSE_FORMAT.to_string(),
            version: SPARSE_VERSION,
        })?;
        emit(&IndexRecord::Meta {
            params: self.params,
            tokenizer: self.tokenizer.clone(),
            avgdl: self.avgdl,
            n_docs: self.n_docs,
        })?;
        for (id, &len) in &self.doc_len {
            emit(&IndexRecord::Doc {
                id: id.clone(),
                len,
            })?;
        }
        for (term, list) in &self.postings {
            emit(&IndexRecord::Term {
                term: term.clone(),
                postings: list.clone(),
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<InvertedIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let at = |lineno: usize| format!("{}:{}", path.display(), lineno + 1);
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path.display().to_string(), "empty index file"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        match serde_json::from_str(&header).map_err(|e| Error::parse(at(lineno), e.to_string()))? {
            IndexRecord::Header { format, version }
                if format == SPARSE_FORMAT && version == SPARSE_VERSION => {}
            _ => {
                return Err(Error::parse(
                    at(lineno),
                    format!("expected {SPARSE_FORMAT} v{SPARSE_VERSION} header"),
                ))
            }
        }

        let mut meta = None;
        let mut doc_len = BTreeMap::new();
        let mut postings = BTreeMap::new();
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: IndexRecord =
                serde_json::from_str(&line).map_err(|e| Error::parse(at(lineno), e.to_string()))?;
            match record {
                IndexRecord::Header { .. } => {
                    return Err(Error::parse(at(lineno), "unexpected second header"))
                }
                IndexRecord::Meta {
                    params,
                    tokenizer,
                    avgdl,
                    n_docs,
                } => meta = Some((params, tokenizer, avgdl, n_docs)),
                IndexRecord::Doc { id, len } => {
                    doc_len.insert(id, len);
                }
                IndexRecord::Term { term, postings: p } => {
                    postings.insert(term, p);
                }
            }
        }
        let (params, tokenizer, avgdl, n_docs) =
            meta.ok_or_else(|| Error::parse(path.display().to_string(), "missing meta record"))?;
        let index = InvertedIndex {
            postings,
            doc_len,
            avgdl,
            n_docs,
            params,
            tokenizer,
        };
        index.validate(path)?;
        Ok(index)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let at = || path.display().to_string();
        if self.n_docs != self.doc_len.len() {
            return Err(Error::parse(at(), "n_docs does not match doc records"));
        }
        if self.n_docs == 0 {
            return Err(Error::parse(at(), "index has no documents"));
        }
        let recomputed =
            self.doc_len.values().map(|&l| f64::from(l)).sum::<f64>() / self.n_docs as f64;
        if (recomputed - self.avgdl).abs() > 1e-9 {
            return Err(Error::parse(
                at(),
                "stored avgdl disagrees with doc lengths",
            ));
        }
        for (term, list) in &self.postings {
            for w in list.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::parse(
                        at(),
                        format!("postings for `{term}` not sorted"),
                    ));
                }
            }
            for (id, _) in list {
                if !self.doc_len.contains_key(id) {
                    return Err(Error::parse(
                        at(),
                        format!("postings for `{term}` reference unknown doc `{id}`"),
                    ));
                }
            }
        }
        Ok(())
    }
}

const SPARSE_FORMAT: &str = "sparse-index";
const SPARSE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum IndexRecord {
    Header {
        format: String,
        version: u32,
    },
    Meta {
        params: Bm25Params,
        tokenizer: TokenizerKind,
        avgdl: f64,
        n_docs: usize,
    },
    Doc {
        id: String,
        len: u32,
    },
    Term {
        term: String,
        postings: Vec<(String, u32)>,
    },
}
