//! Judge backends: remote LLM with retry-then-fallback, gold-overlap
//! oracle, replay store, and fixed scores.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, TokenizerKind};
use crate::error::{Error, Result};
use crate::judge::transport::{ChatTransport, HttpChatTransport};
use crate::judge::{
    parse_scores, parse_scores_strict, render_prompt, EffectivenessScore, JudgeConfig, JudgeVerdict,
};

/// Lookup key for replay fixtures: length-framed SHA-256 over the
/// question and both candidate texts, hex-encoded.
pub fn replay_key(question: &str, dense_top1: &str, bm25_top1: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [question, dense_top1, bm25_top1] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One line of a replay fixture file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key_hash: String,
    pub s_dense: u8,
    pub s_bm25: u8,
    pub raw_response: String,
}

pub enum Judge {
    Remote(RemoteJudge),
    Oracle,
    Replay(ReplayJudge),
    Fixed {
        s_dense: EffectivenessScore,
        s_bm25: EffectivenessScore,
    },
}

impl Judge {
    pub fn from_config(config: &JudgeConfig) -> Result<Judge> {
        match config {
            JudgeConfig::RemoteLlm {
                endpoint,
                model_id,
                api_key_env,
                max_retries,
                temperature,
                strict_parse,
            } => Ok(Judge::Remote(RemoteJudge::new(
                Box::new(HttpChatTransport::new(
                    endpoint.clone(),
                    model_id.clone(),
                    api_key_env.clone(),
                    *temperature,
                )),
                *max_retries,
                *strict_parse,
            ))),
            JudgeConfig::Oracle => Ok(Judge::Oracle),
            JudgeConfig::Replay { replay_path } => {
                Ok(Judge::Replay(ReplayJudge::load(replay_path)?))
            }
            JudgeConfig::Fixed { s_dense, s_bm25 } => Ok(Judge::Fixed {
                s_dense: EffectivenessScore::new(*s_dense)?,
                s_bm25: EffectivenessScore::new(*s_bm25)?,
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Judge::Remote(_) => "remote_llm",
            Judge::Oracle => "oracle",
            Judge::Replay(_) => "replay",
            Judge::Fixed { .. } => "fixed",
        }
    }

    /// True when repeated runs with the same inputs return the same
    /// verdicts. Only the remote judge is nondeterministic.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Judge::Remote(_))
    }

    /// Score the two top-1 candidates for `question`.
    ///
    /// Remote transport and parse failures retry up to the configured
    /// budget and then resolve to the (0, 0) fallback verdict; replay
    /// misses and configuration faults are hard errors.
    pub fn judge(
        &self,
        question: &str,
        dense_top1: &str,
        bm25_top1: &str,
        gold_text: Option<&str>,
    ) -> Result<JudgeVerdict> {
        if question.is_empty() {
            return Err(Error::InvalidInput(
                "question must be non-empty".to_string(),
            ));
        }
        match self {
            Judge::Remote(remote) => Ok(remote.judge(question, dense_top1, bm25_top1)),
            Judge::Oracle => {
                let gold = gold_text.ok_or_else(|| {
                    Error::Config("oracle judge requires the gold paragraph text".to_string())
                })?;
                let s_dense = oracle_score(dense_top1, gold);
                let s_bm25 = oracle_score(bm25_top1, gold);
                let raw = format!("{} {}", s_dense.get(), s_bm25.get());
                Ok(JudgeVerdict::new(s_dense, s_bm25, raw, 0))
            }
            Judge::Replay(replay) => replay.judge(question, dense_top1, bm25_top1),
            Judge::Fixed { s_dense, s_bm25 } => {
                let raw = format!("{} {}", s_dense.get(), s_bm25.get());
                Ok(JudgeVerdict::new(*s_dense, *s_bm25, raw, 0))
            }
        }
    }
}

/// Spec-shaped convenience wrapper: build the judge from config and
/// score one triple.
pub fn judge(
    config: &JudgeConfig,
    question: &str,
    dense_top1: &str,
    bm25_top1: &str,
    gold_text: Option<&str>,
) -> Result<JudgeVerdict> {
    Judge::from_config(config)?.judge(question, dense_top1, bm25_top1, gold_text)
}

pub struct RemoteJudge {
    transport: Box<dyn ChatTransport>,
    max_retries: u32,
    strict_parse: bool,
}

impl RemoteJudge {
    pub fn new(transport: Box<dyn ChatTransport>, max_retries: u32, strict_parse: bool) -> Self {
        RemoteJudge {
            transport,
            max_retries,
            strict_parse,
        }
    }

    fn judge(&self, question: &str, dense_top1: &str, bm25_top1: &str) -> JudgeVerdict {
        let prompt = render_prompt(question, dense_top1, bm25_top1);
        let mut last_response = String::new();
        for attempt in 0..=self.max_retries {
            match self.transport.complete(&prompt) {
                Ok(text) => {
                    last_response = text;
                    let parsed = if self.strict_parse {
                        parse_scores_strict(&last_response)
                    } else {
                        parse_scores(&last_response)
                    };
                    if let Ok((s_dense, s_bm25)) = parsed {
                        return JudgeVerdict::new(s_dense, s_bm25, last_response, attempt);
                    }
                }
                Err(e) => last_response = format!("<transport error: {e}>"),
            }
        }
        JudgeVerdict::fallback(last_response, self.max_retries)
    }
}

/// Deterministic grading for the oracle judge: exact text equality is a
/// direct hit (5); otherwise token-set Jaccard overlap with the gold
/// text maps monotonically onto 0..=4:
///
/// | Jaccard  | score |
/// |----------|-------|
/// | >= 0.8   | 4     |
/// | >= 0.6   | 3     |
/// | >= 0.4   | 2     |
/// | >= 0.2   | 1     |
/// | <  0.2   | 0     |
///
/// This is a test instrument for offline runs, not a model of LLM
/// judgment.
fn oracle_score(candidate: &str, gold: &str) -> EffectivenessScore {
    if candidate == gold {
        return EffectivenessScore::clamped(5);
    }
    let tokens = |text: &str| -> std::collections::BTreeSet<String> {
        tokenize(text, &TokenizerKind::WordLower)
            .expect("word_lower never fails")
            .into_iter()
            .collect()
    };
    let a = tokens(candidate);
    let b = tokens(gold);
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    let jaccard = if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    };
    let score = match jaccard {
        j if j >= 0.8 => 4,
        j if j >= 0.6 => 3,
        j if j >= 0.4 => 2,
        j if j >= 0.2 => 1,
        _ => 0,
    };
    EffectivenessScore::clamped(score)
}

pub struct ReplayJudge {
    records: HashMap<String, ReplayRecord>,
}

impl ReplayJudge {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(&line).map_err(|e| {
                Error::parse(format!("{}:{}", path.display(), lineno + 1), e.to_string())
            })?;
            records.insert(record.key_hash.clone(), record);
        }
        Ok(ReplayJudge { records })
    }

    fn judge(&self, question: &str, dense_top1: &str, bm25_top1: &str) -> Result<JudgeVerdict> {
        let key = replay_key(question, dense_top1, bm25_top1);
        let record = self
            .records
            .get(&key)
            .ok_or(Error::FixtureMissing { key })?;
        Ok(JudgeVerdict::new(
            EffectivenessScore::new(record.s_dense)?,
            EffectivenessScore::new(record.s_bm25)?,
            record.raw_response.clone(),
            0,
        ))
    }
}

/// Write replay fixtures as line-delimited JSON.
pub fn write_replay_file(path: &Path, records: &[ReplayRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
