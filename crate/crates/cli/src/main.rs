//! `dat` — hybrid retrieval with dynamic alpha tuning.
//!
//! Subcommands: `ingest` (SQuAD-layout source -> sampled native corpus),
//! `index` (build and persist both indexes), `search` (one query),
//! `eval` (full measurement protocol), `grid-search` (fixed-alpha
//! sweep), `judge-dump` (record replay fixtures from a live judge).

mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::AppConfig;
use dat_core::corpus::{load_squad_format, sample_corpus, Corpus};
use dat_core::dense::{build_dense_index, provider_from_config, DenseIndex, EmbeddingProvider};
use dat_core::eval::{
    grid_search_alpha, hybrid_sensitive_subset, render_table, run_eval, EvalMethod,
};
use dat_core::fusion::{AlphaValue, HybridPipeline};
use dat_core::judge::{replay_key, write_replay_file, Judge, JudgeConfig, ReplayRecord};
use dat_core::sparse::{build_index, InvertedIndex, ScoredList};

#[derive(Parser)]
#[command(
    name = "dat",
    version,
    about = "Hybrid retrieval with dynamic alpha tuning"
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "dat.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a SQuAD-layout document, sample whole articles up to the
    /// question budget, and write the native corpus file.
    Ingest {
        /// Override source_path from the config.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Override corpus_path as the output location.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_questions: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build and persist the BM25 and dense indexes.
    Index {},
    /// Run one query and print the ranked results.
    Search {
        query: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Dat)]
        method: MethodArg,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        pool_n: Option<usize>,
        #[arg(long)]
        judge_kind: Option<String>,
        #[arg(long)]
        strict_parse: bool,
    },
    /// Evaluate a method over the corpus and write report files.
    Eval {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        pool_n: Option<usize>,
        #[arg(long)]
        judge_kind: Option<String>,
        #[arg(long)]
        strict_parse: bool,
    },
    /// Sweep fixed alpha over the 0.1 grid and report Precision@1.
    GridSearch {
        #[arg(long)]
        pool_n: Option<usize>,
    },
    /// Run the configured judge over every query and record replay
    /// fixtures.
    JudgeDump {
        /// Output fixture file (defaults to replay_path from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        judge_kind: Option<String>,
        #[arg(long)]
        strict_parse: bool,
        #[arg(long)]
        pool_n: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bm25,
    Dense,
    Fixed,
    Dat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SubsetArg {
    All,
    HybridSensitive,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = AppConfig::load(&cli.config)?;
    match cli.command {
        Command::Ingest {
            source,
            out,
            max_questions,
            seed,
        } => cmd_ingest(&config, source, out, max_questions, seed),
        Command::Index {} => cmd_index(&config),
        Command::Search {
            query,
            method,
            alpha,
            k,
            pool_n,
            judge_kind,
            strict_parse,
        } => cmd_search(
            &config,
            &query,
            method,
            alpha,
            k,
            pool_n,
            judge_kind.as_deref(),
            strict_parse,
        ),
        Command::Eval {
            method,
            subset,
            out_dir,
            alpha,
            pool_n,
            judge_kind,
            strict_parse,
        } => cmd_eval(
            &config,
            method,
            subset,
            &out_dir,
            alpha,
            pool_n,
            judge_kind.as_deref(),
            strict_parse,
        ),
        Command::GridSearch { pool_n } => cmd_grid_search(&config, pool_n),
        Command::JudgeDump {
            out,
            judge_kind,
            strict_parse,
            pool_n,
        } => cmd_judge_dump(&config, out, judge_kind.as_deref(), strict_parse, pool_n),
    }
}

fn cmd_ingest(
    config: &AppConfig,
    source: Option<PathBuf>,
    out: Option<PathBuf>,
    max_questions: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let source = source
        .or_else(|| config.source_path.clone())
        .context("no source document: set source_path in the config or pass --source")?;
    let out = out.unwrap_or_else(|| config.corpus_path.clone());
    let max_questions = max_questions.unwrap_or(config.max_questions);
    let seed = seed.unwrap_or(config.seed);

    let corpus = load_squad_format(&source)?.with_language_tag(config.language);
    let sampled = sample_corpus(&corpus, max_questions, seed)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).ok();
    }
    sampled.save_native(&out)?;
    println!(
        "articles={} paragraphs={} questions={} -> {}",
        sampled.n_articles(),
        sampled.n_paragraphs(),
        sampled.n_queries(),
        out.display()
    );
    Ok(())
}

fn cmd_index(config: &AppConfig) -> Result<()> {
    let corpus = Corpus::load_native(&config.corpus_path)?;
    std::fs::create_dir_all(&config.index_dir)
        .with_context(|| format!("creating {}", config.index_dir.display()))?;

    let sparse = build_index(&corpus, config.tokenizer_kind(), config.bm25_params()?)?;
    sparse.save(&config.sparse_index_path())?;

    let provider = provider_from_config(&config.embedding)?;
    warn_if_live_embedding(&config.embedding);
    let dense = build_dense_index(&corpus, provider.as_ref())?;
    dense.save(&config.dense_index_path())?;

    println!(
        "indexed {} paragraphs: sparse -> {}, dense({} dim, {}) -> {}",
        corpus.n_paragraphs(),
        config.sparse_index_path().display(),
        dense.dim(),
        dense.model_id(),
        config.dense_index_path().display()
    );
    Ok(())
}

/// Everything the query-time commands need, loaded from disk.
struct Stack {
    corpus: Corpus,
    sparse: InvertedIndex,
    dense: DenseIndex,
    provider: Box<dyn EmbeddingProvider>,
}

impl Stack {
    fn load(config: &AppConfig) -> Result<Self> {
        let corpus = Corpus::load_native(&config.corpus_path)?;
        let sparse = InvertedIndex::load(&config.sparse_index_path()).with_context(|| {
            format!(
                "loading sparse index (run `dat index` first?): {}",
                config.sparse_index_path().display()
            )
        })?;
        let dense = DenseIndex::load(&config.dense_index_path())?;
        let provider = provider_from_config(&config.embedding)?;
        warn_if_live_embedding(&config.embedding);
        Ok(Stack {
            corpus,
            sparse,
            dense,
            provider,
        })
    }

    fn pipeline(&self) -> Result<HybridPipeline<'_>> {
        Ok(HybridPipeline::new(
            &self.corpus,
            &self.sparse,
            &self.dense,
            self.provider.as_ref(),
        )?)
    }
}

fn build_judge(
    config: &AppConfig,
    kind_override: Option<&str>,
    strict_parse: bool,
) -> Result<Judge> {
    let judge_config = config.judge_config(kind_override, strict_parse)?;
    if matches!(judge_config, JudgeConfig::RemoteLlm { .. }) {
        eprintln!("note: live judge endpoint in use; outputs are nondeterministic");
    }
    Ok(Judge::from_config(&judge_config)?)
}

fn warn_if_live_embedding(config: &dat_core::dense::EmbeddingProviderConfig) {
    use dat_core::dense::EmbeddingProviderConfig as E;
    match config {
        E::RemoteHttp { .. } => {
            eprintln!("note: live embedding endpoint in use; outputs are nondeterministic")
        }
        E::Cached {
            inner: Some(inner), ..
        } => warn_if_live_embedding(inner),
        _ => {}
    }
}

fn print_ranking(ranking: &ScoredList) {
    for (rank, (id, score)) in ranking.iter().enumerate() {
        println!("{:>4}  {:<24} {:.6}", rank + 1, id, score);
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    config: &AppConfig,
    query: &str,
    method: MethodArg,
    alpha: Option<f64>,
    k: Option<usize>,
    pool_n: Option<usize>,
    judge_kind: Option<&str>,
    strict_parse: bool,
) -> Result<()> {
    let stack = Stack::load(config)?;
    let pipeline = stack.pipeline()?;
    let k = k.unwrap_or(config.k);
    let pool_n = pool_n.unwrap_or(config.pool_n).max(k);

    match method {
        MethodArg::Bm25 => {
            print_ranking(&stack.sparse.search(query, k)?);
        }
        MethodArg::Dense => {
            let vector = dat_core::dense::embed(stack.provider.as_ref(), &[query.to_string()])?
                .pop()
                .expect("one vector");
            print_ranking(&stack.dense.search(&vector, k)?);
        }
        MethodArg::Fixed => {
            let alpha = match alpha {
                Some(a) => AlphaValue::from_f64(a)?,
                None => config.fixed_alpha_value(),
            };
            let result = pipeline.search_fixed(query, alpha, k, pool_n)?;
            println!("alpha = {}", result.alpha_used);
            print_ranking(&result.ranking);
        }
        MethodArg::Dat => {
            let judge = build_judge(config, judge_kind, strict_parse)?;
            let result = pipeline.search_dat(query, None, &judge, k, pool_n)?;
            if let Some(verdict) = &result.verdict {
                println!(
                    "S_v = {}  S_b = {}  alpha = {}{}",
                    verdict.s_dense.get(),
                    verdict.s_bm25.get(),
                    result.alpha_used,
                    if verdict.is_fallback {
                        "  (fallback)"
                    } else {
                        ""
                    }
                );
            } else {
                println!(
                    "alpha = {} (single-channel short circuit)",
                    result.alpha_used
                );
            }
            print_ranking(&result.ranking);
        }
    }
    Ok(())
}

fn method_slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    config: &AppConfig,
    method: MethodArg,
    subset: SubsetArg,
    out_dir: &PathBuf,
    alpha: Option<f64>,
    pool_n: Option<usize>,
    judge_kind: Option<&str>,
    strict_parse: bool,
) -> Result<()> {
    let stack = Stack::load(config)?;
    let pipeline = stack.pipeline()?;
    let pool_n = pool_n.unwrap_or(config.pool_n);

    let judge;
    let method_spec = match method {
        MethodArg::Bm25 => EvalMethod::Bm25Only,
        MethodArg::Dense => EvalMethod::DenseOnly,
        MethodArg::Fixed => {
            let alpha = match alpha {
                Some(a) => AlphaValue::from_f64(a)?,
                None => config.fixed_alpha_value(),
            };
            EvalMethod::Fixed(alpha)
        }
        MethodArg::Dat => {
            judge = build_judge(config, judge_kind, strict_parse)?;
            EvalMethod::Dat(&judge)
        }
    };

    let full = run_eval(&pipeline, &method_spec, pool_n)?;
    let report = match subset {
        SubsetArg::All => full,
        SubsetArg::HybridSensitive => {
            let ids: BTreeSet<String> = hybrid_sensitive_subset(&full.records);
            let label = format!("{} [hybrid-sensitive]", full.method_label);
            full.filtered(&ids, label)
        }
    };
    report.verify_self_consistent()?;

    std::fs::create_dir_all(out_dir)?;
    let mut slug = method_slug(&report.method_label);
    if subset == SubsetArg::HybridSensitive {
        slug = format!("{slug}_subset");
    }
    let report_path = out_dir.join(format!("{slug}.report.jsonl"));
    let table_path = out_dir.join(format!("{slug}.table.txt"));
    report.write_jsonl(&report_path)?;
    std::fs::write(&table_path, render_table(&[&report]))?;

    println!(
        "{}: n={} P@1={:.4} MRR@20={:.4} alpha-acc={:.4} fallbacks={}",
        report.method_label,
        report.n_queries,
        report.precision_at_1,
        report.mrr_at_20,
        report.alpha_selection_accuracy,
        report.n_fallback_verdicts
    );
    println!("report -> {}", report_path.display());
    println!("table  -> {}", table_path.display());
    Ok(())
}

fn cmd_grid_search(config: &AppConfig, pool_n: Option<usize>) -> Result<()> {
    let stack = Stack::load(config)?;
    let pipeline = stack.pipeline()?;
    let pool_n = pool_n.unwrap_or(config.pool_n);
    if pool_n < config.k {
        bail!("pool_n ({pool_n}) must be >= k ({})", config.k);
    }
    let (best, table) = grid_search_alpha(&pipeline, stack.corpus.queries(), pool_n)?;
    println!("{:<8} {:>12}", "alpha", "Precision@1");
    for (alpha, p1) in &table {
        println!("{:<8} {:>12.4}", alpha.to_string(), p1);
    }
    println!("alpha* = {best}");
    Ok(())
}

fn cmd_judge_dump(
    config: &AppConfig,
    out: Option<PathBuf>,
    judge_kind: Option<&str>,
    strict_parse: bool,
    pool_n: Option<usize>,
) -> Result<()> {
    let out = out
        .or_else(|| config.replay_path.clone())
        .context("no output path: set replay_path in the config or pass --out")?;
    let stack = Stack::load(config)?;
    let pipeline = stack.pipeline()?;
    let judge = build_judge(config, judge_kind, strict_parse)?;
    let pool_n = pool_n.unwrap_or(config.pool_n);

    let mut records = Vec::new();
    let mut fallbacks = 0usize;
    for query in stack.corpus.queries() {
        let (dense_pool, bm25_pool) = pipeline.pools(&query.text, pool_n)?;
        let (Some((dense_id, _)), Some((bm25_id, _))) = (dense_pool.top(), bm25_pool.top()) else {
            continue;
        };
        let dense_text = &stack.corpus.paragraph(dense_id).unwrap().text;
        let bm25_text = &stack.corpus.paragraph(bm25_id).unwrap().text;
        let gold_text = stack
            .corpus
            .paragraph(&query.gold_paragraph_id)
            .map(|p| p.text.clone());
        let verdict = judge.judge(&query.text, dense_text, bm25_text, gold_text.as_deref())?;
        if verdict.is_fallback {
            fallbacks += 1;
        }
        records.push(ReplayRecord {
            key_hash: replay_key(&query.text, dense_text, bm25_text),
            s_dense: verdict.s_dense.get(),
            s_bm25: verdict.s_bm25.get(),
            raw_response: verdict.raw_response,
        });
    }
    write_replay_file(&out, &records)?;
    println!(
        "recorded {} verdicts ({} fallbacks) -> {}",
        records.len(),
        fallbacks,
        out.display()
    );
    Ok(())
}
