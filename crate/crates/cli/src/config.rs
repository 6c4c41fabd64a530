//! Declarative run configuration: a TOML file plus per-command flag
//! overrides. Credentials never live here — remote providers name an
//! environment variable instead.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use dat_core::corpus::{LanguageTag, TokenizerKind};
use dat_core::dense::EmbeddingProviderConfig;
use dat_core::fusion::AlphaValue;
use dat_core::judge::JudgeConfig;
use dat_core::sparse::Bm25Params;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    /// SQuAD-layout source document (`ingest` input).
    pub source_path: Option<PathBuf>,
    /// Native corpus file (`ingest` output; input to everything else).
    pub corpus_path: PathBuf,
    /// Directory holding the persisted indexes.
    pub index_dir: PathBuf,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::max_questions")]
    pub max_questions: usize,
    #[serde(default = "defaults::pool_n")]
    pub pool_n: usize,
    #[serde(default = "defaults::k")]
    pub k: usize,
    /// Weight for the fixed-hybrid baseline.
    #[serde(default = "defaults::fixed_alpha")]
    pub fixed_alpha: f64,
    #[serde(default)]
    pub language: LanguageTag,
    /// `word_lower` or `cjk_bigram`; defaults by language.
    #[serde(default)]
    pub tokenizer: Option<String>,
    /// Fallback replay fixture path for `--judge-kind replay` when the
    /// `[judge]` table selects another kind.
    pub replay_path: Option<PathBuf>,
    pub embedding: EmbeddingProviderConfig,
    pub judge: JudgeConfig,
    #[serde(default)]
    pub bm25: Bm25Section,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Bm25Section {
    pub k1: Option<f64>,
    pub b: Option<f64>,
}

mod defaults {
    pub fn seed() -> u64 {
        42
    }
    pub fn max_questions() -> usize {
        3000
    }
    pub fn pool_n() -> usize {
        100
    }
    pub fn k() -> usize {
        20
    }
    pub fn fixed_alpha() -> f64 {
        0.6
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: AppConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if self.pool_n < self.k {
            bail!("pool_n ({}) must be >= k ({})", self.pool_n, self.k);
        }
        AlphaValue::from_f64(self.fixed_alpha).context("fixed_alpha")?;
        if let Some(name) = &self.tokenizer {
            if !matches!(name.as_str(), "word_lower" | "cjk_bigram") {
                bail!("unknown tokenizer `{name}` (expected word_lower or cjk_bigram)");
            }
        }
        Ok(())
    }

    pub fn fixed_alpha_value(&self) -> AlphaValue {
        AlphaValue::from_f64(self.fixed_alpha).expect("validated at load")
    }

    pub fn bm25_params(&self) -> Result<Bm25Params> {
        let default = Bm25Params::default();
        Ok(Bm25Params::new(
            self.bm25.k1.unwrap_or(default.k1),
            self.bm25.b.unwrap_or(default.b),
        )?)
    }

    pub fn tokenizer_kind(&self) -> TokenizerKind {
        match self.tokenizer.as_deref() {
            Some("cjk_bigram") => TokenizerKind::CjkBigram,
            Some(_) => TokenizerKind::WordLower,
            None => match self.language {
                LanguageTag::Cjk => TokenizerKind::CjkBigram,
                _ => TokenizerKind::WordLower,
            },
        }
    }

    pub fn sparse_index_path(&self) -> PathBuf {
        self.index_dir.join("sparse.jsonl")
    }

    pub fn dense_index_path(&self) -> PathBuf {
        self.index_dir.join("dense.jsonl")
    }

    /// Resolve the judge config, applying a `--judge-kind` override.
    pub fn judge_config(
        &self,
        kind_override: Option<&str>,
        strict_parse: bool,
    ) -> Result<JudgeConfig> {
        let mut config = match kind_override {
            None => self.judge.clone(),
            Some("oracle") => JudgeConfig::Oracle,
            Some("fixed") => match &self.judge {
                JudgeConfig::Fixed { .. } => self.judge.clone(),
                _ => bail!("--judge-kind fixed needs a [judge] table with kind = \"fixed\""),
            },
            Some("replay") => match &self.judge {
                JudgeConfig::Replay { .. } => self.judge.clone(),
                _ => {
                    let path = self
                        .replay_path
                        .clone()
                        .context("--judge-kind replay needs replay_path in the config")?;
                    JudgeConfig::Replay { replay_path: path }
                }
            },
            Some("remote") => match &self.judge {
                JudgeConfig::RemoteLlm { .. } => self.judge.clone(),
                _ => bail!("--judge-kind remote needs a [judge] table with kind = \"remote_llm\""),
            },
            Some(other) => bail!("unknown judge kind `{other}`"),
        };
        if strict_parse {
            if let JudgeConfig::RemoteLlm {
                strict_parse: flag, ..
            } = &mut config
            {
                *flag = true;
            }
        }
        Ok(config)
    }
}
