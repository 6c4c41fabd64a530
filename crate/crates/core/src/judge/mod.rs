//! Effectiveness judging of top-1 retrieval results.
//!
//! For each query, the dense and BM25 top-1 texts are scored 0-5 by a
//! judge; the score pair drives the per-query fusion weight. Four judge
//! backends are provided: a remote chat-completion endpoint, a
//! gold-overlap oracle, a replay store of recorded verdicts, and a fixed
//! constant pair.

mod backends;
mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backends::{
    judge, replay_key, write_replay_file, Judge, RemoteJudge, ReplayJudge, ReplayRecord,
};
pub use transport::{ChatTransport, HttpChatTransport, ScriptedTransport};

/// The rendered prompt's skeleton. Placeholders `{question}`,
/// `{vector_reference}` and `{bm25_reference}` are substituted by
/// [`render_prompt`]; everything else is emitted byte for byte.
pub const PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

/// An integer effectiveness score in {0, 1, 2, 3, 4, 5}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EffectivenessScore(u8);

impl EffectivenessScore {
    pub fn new(value: u8) -> Result<Self> {
        if value > 5 {
            return Err(Error::InvalidInput(format!(
                "effectiveness score must be in 0..=5, got {value}"
            )));
        }
        Ok(EffectivenessScore(value))
    }

    /// Clamp an arbitrary integer into the valid range.
    pub fn clamped(value: i64) -> Self {
        EffectivenessScore(value.clamp(0, 5) as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for EffectivenessScore {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        EffectivenessScore::new(value)
    }
}

impl From<EffectivenessScore> for u8 {
    fn from(score: EffectivenessScore) -> u8 {
        score.0
    }
}

/// The judge's output for one query: dense score, BM25 score, and
/// provenance. `is_fallback` marks verdicts synthesized after retry
/// exhaustion; those always carry (0, 0), which the alpha rule maps to a
/// neutral 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub s_dense: EffectivenessScore,
    pub s_bm25: EffectivenessScore,
    pub raw_response: String,
    pub retries_used: u32,
    pub is_fallback: bool,
}

impl JudgeVerdict {
    pub fn new(
        s_dense: EffectivenessScore,
        s_bm25: EffectivenessScore,
        raw_response: String,
        retries_used: u32,
    ) -> Self {
        JudgeVerdict {
            s_dense,
            s_bm25,
            raw_response,
            retries_used,
            is_fallback: false,
        }
    }

    pub fn fallback(raw_response: String, retries_used: u32) -> Self {
        JudgeVerdict {
            s_dense: EffectivenessScore(0),
            s_bm25: EffectivenessScore(0),
            raw_response,
            retries_used,
            is_fallback: true,
        }
    }
}

/// Declarative judge selection, embeddable in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeConfig {
    RemoteLlm {
        endpoint: String,
        model_id: String,
        #[serde(default = "default_judge_key_env")]
        api_key_env: String,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        #[serde(default)]
        temperature: f64,
        #[serde(default)]
        strict_parse: bool,
    },
    Oracle,
    Replay {
        replay_path: std::path::PathBuf,
    },
    Fixed {
        s_dense: u8,
        s_bm25: u8,
    },
}

fn default_judge_key_env() -> String {
    "JUDGE_API_KEY".to_string()
}

fn default_max_retries() -> u32 {
    2
}

/// Substitute the three placeholders into [`PROMPT_TEMPLATE`].
///
/// Substitution is single-pass: placeholder-like text inside the inputs
/// is inserted literally, never re-expanded.
pub fn render_prompt(question: &str, vector_reference: &str, bm25_reference: &str) -> String {
    let mut out = String::with_capacity(
        PROMPT_TEMPLATE.len() + question.len() + vector_reference.len() + bm25_reference.len(),
    );
    let mut rest = PROMPT_TEMPLATE;
    for (placeholder, value) in [
        ("{question}", question),
        ("{vector_reference}", vector_reference),
        ("{bm25_reference}", bm25_reference),
    ] {
        let idx = rest
            .find(placeholder)
            .expect("template contains each placeholder exactly once");
        out.push_str(&rest[..idx]);
        out.push_str(value);
        rest = &rest[idx + placeholder.len()..];
    }
    out.push_str(rest);
    out
}

/// Lenient score extraction: the first two integer literals anywhere in
/// the text, each clamped into 0..=5. First is the dense score, second
/// the BM25 score. Errors when fewer than two integers appear.
pub fn parse_scores(response_text: &str) -> Result<(EffectivenessScore, EffectivenessScore)> {
    let mut found = scan_integers(response_text);
    match (found.next(), found.next()) {
        (Some(a), Some(b)) => Ok((
            EffectivenessScore::clamped(a),
            EffectivenessScore::clamped(b),
        )),
        _ => Err(Error::ScoreParse(format!(
            "expected two integers, got {:?}",
            truncate_for_error(response_text)
        ))),
    }
}

/// Strict contract parsing: the whole trimmed response must be exactly
/// two in-range integers separated by a single space.
pub fn parse_scores_strict(
    response_text: &str,
) -> Result<(EffectivenessScore, EffectivenessScore)> {
    let trimmed = response_text.trim();
    let parts: Vec<&str> = trimmed.split(' ').collect();
    let err = || {
        Error::ScoreParse(format!(
            "strict mode expects \"a b\" with a, b in 0..=5, got {:?}",
            truncate_for_error(response_text)
        ))
    };
    let [a, b] = parts.as_slice() else {
        return Err(err());
    };
    let parse = |s: &str| -> Result<EffectivenessScore> {
        let value: u8 = s.parse().map_err(|_| err())?;
        EffectivenessScore::new(value).map_err(|_| err())
    };
    Ok((parse(a)?, parse(b)?))
}

/// Standalone signed decimal integer literals, left to right. A digit
/// run embedded in a word ("BM25") is not a literal; a `-` makes the
/// number negative only when directly attached to the digits and not
/// itself glued to a word ("top-3" scans as 3). Values saturate at i64
/// bounds.
fn scan_integers(text: &str) -> impl Iterator<Item = i64> + '_ {
    let bytes = text.as_bytes();
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < bytes.len() {
            if !bytes[i].is_ascii_digit() {
                i += 1;
                continue;
            }
            let start = i;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            i = end;
            let before_digits = start.checked_sub(1).map(|j| bytes[j]);
            if before_digits.is_some_and(|b| b.is_ascii_alphanumeric()) {
                continue;
            }
            let negative = before_digits == Some(b'-')
                && !start
                    .checked_sub(2)
                    .is_some_and(|j| bytes[j].is_ascii_alphanumeric());
            let magnitude: i64 = text[start..end].parse().unwrap_or(i64::MAX);
            return Some(if negative {
                magnitude.checked_neg().unwrap_or(i64::MIN)
            } else {
                magnitude
            });
        }
        None
    })
}

fn truncate_for_error(text: &str) -> String {
    text.chars().take(80).collect()
}
