//! Tokenization strategies for corpus text.
//!
//! Three variants:
//! - `WordLower`: maximal alphanumeric runs, lowercased. The default for
//!   English corpora.
//! - `CjkBigram`: overlapping character bigrams over CJK-ideograph runs,
//!   `WordLower` behavior everywhere else. A model-free stand-in for a
//!   proper Chinese word segmenter.
//! - `External`: caller-supplied token lists keyed by the exact text,
//!   for byte-exact reproduction with a segmenter run out of band.
//!
//! Tokenization is pure: the same `(text, kind)` pair always yields the
//! same token sequence, on every platform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TokenizerKind {
    WordLower,
    CjkBigram,
    External {
        tokens: BTreeMap<String, Vec<String>>,
    },
}

impl TokenizerKind {
    /// External tokenizer from pre-segmented (text, tokens) pairs.
    pub fn external(pairs: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        TokenizerKind::External {
            tokens: pairs.into_iter().collect(),
        }
    }
}

/// Split `text` into tokens according to `kind`.
///
/// Errors only for the `External` variant when `text` has no supplied
/// token list.
pub fn tokenize(text: &str, kind: &TokenizerKind) -> Result<Vec<String>> {
    match kind {
        TokenizerKind::WordLower => Ok(word_lower(text)),
        TokenizerKind::CjkBigram => Ok(cjk_bigram(text)),
        TokenizerKind::External { tokens } => tokens.get(text).cloned().ok_or_else(|| {
            Error::Config(format!(
                "external tokenizer has no tokens for text starting {:?}",
                text.chars().take(32).collect::<String>()
            ))
        }),
    }
}

/// Maximal alphanumeric runs, lowercased via Unicode case mapping.
fn word_lower(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// CJK runs become overlapping character bigrams (a run of length n
/// contributes n-1 bigrams; a lone character stands as its own token).
/// Non-CJK stretches fall through to `word_lower`.
fn cjk_bigram(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cjk_run: Vec<char> = Vec::new();
    let mut other = String::new();

    let flush_cjk = |run: &mut Vec<char>, out: &mut Vec<String>| {
        match run.len() {
            0 => {}
            1 => out.push(run[0].to_string()),
            _ => {
                for pair in run.windows(2) {
                    let mut bigram = String::new();
                    bigram.push(pair[0]);
                    bigram.push(pair[1]);
                    out.push(bigram);
                }
            }
        }
        run.clear();
    };

    for c in text.chars() {
        if is_cjk(c) {
            if !other.is_empty() {
                tokens.append(&mut word_lower(&other));
                other.clear();
            }
            cjk_run.push(c);
        } else {
            flush_cjk(&mut cjk_run, &mut tokens);
            other.push(c);
        }
    }
    flush_cjk(&mut cjk_run, &mut tokens);
    if !other.is_empty() {
        tokens.append(&mut word_lower(&other));
    }
    tokens
}

/// CJK unified ideographs (base block, extension A, compatibility block,
/// and the supplementary-plane extensions).
fn is_cjk(c: char) -> bool {
    matches!(u32::from(c),
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}
