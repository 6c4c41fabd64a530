//! Driving the evaluation: per-query alpha grids, method evaluation,
//! fixed-alpha grid search, and report rendering.

use std::collections::BTreeMap;

use crate::corpus::QueryRecord;
use crate::error::{Error, Result};
use crate::eval::{rank_of_gold, EvalReport, QueryEvalRecord};
use crate::fusion::{fuse, AlphaValue, HybridPipeline};
use crate::judge::Judge;
use crate::sparse::ScoredList;

/// What picks the per-query alpha.
pub enum EvalMethod<'a> {
    /// Constant alpha 0.0.
    Bm25Only,
    /// Constant alpha 1.0.
    DenseOnly,
    /// A constant alpha.
    Fixed(AlphaValue),
    /// Per-query alpha from judged top-1 effectiveness.
    Dat(&'a Judge),
}

impl EvalMethod<'_> {
    pub fn label(&self) -> String {
        match self {
            EvalMethod::Bm25Only => "bm25_only (alpha = 0.0)".to_string(),
            EvalMethod::DenseOnly => "dense_only (alpha = 1.0)".to_string(),
            EvalMethod::Fixed(alpha) => format!("fixed (alpha = {alpha})"),
            EvalMethod::Dat(judge) => format!("dat ({})", judge.label()),
        }
    }
}

/// Gold rank under every grid alpha, fusing the given pools at
/// `k = pool_n`.
pub fn grid_ranks_for_pools(
    dense_pool: &ScoredList,
    bm25_pool: &ScoredList,
    gold_id: &str,
    pool_n: usize,
) -> BTreeMap<AlphaValue, Option<u32>> {
    AlphaValue::grid()
        .into_iter()
        .map(|alpha| {
            let ranking = fuse(dense_pool, bm25_pool, alpha, pool_n);
            (alpha, rank_of_gold(&ranking, gold_id))
        })
        .collect()
}

/// Retrieve the pools once and rank the gold paragraph under all eleven
/// grid alphas.
pub fn alpha_grid_ranks(
    pipeline: &HybridPipeline<'_>,
    query: &QueryRecord,
    pool_n: usize,
) -> Result<BTreeMap<AlphaValue, Option<u32>>> {
    let (dense_pool, bm25_pool) = pipeline.pools(&query.text, pool_n)?;
    Ok(grid_ranks_for_pools(
        &dense_pool,
        &bm25_pool,
        &query.gold_paragraph_id,
        pool_n,
    ))
}

/// Evaluate one method over every query of the pipeline's corpus.
///
/// Pools are retrieved once per query and reused for the whole alpha
/// grid and, for DAT, the judge call. `pool_n` must be at least 20 so
/// MRR@20 sees a full window, and at least 1 query is required.
pub fn run_eval(
    pipeline: &HybridPipeline<'_>,
    method: &EvalMethod<'_>,
    pool_n: usize,
) -> Result<EvalReport> {
    if pool_n < 20 {
        return Err(Error::InvalidInput(format!(
            "pool_n must be >= 20 for MRR@20, got {pool_n}"
        )));
    }
    let queries = pipeline.corpus().queries();
    let mut records = Vec::with_capacity(queries.len());
    for query in queries {
        let (dense_pool, bm25_pool) = pipeline.pools(&query.text, pool_n)?;
        let grid = grid_ranks_for_pools(&dense_pool, &bm25_pool, &query.gold_paragraph_id, pool_n);
        let (chosen_alpha, verdict) = match method {
            EvalMethod::Bm25Only => (AlphaValue::ZERO, None),
            EvalMethod::DenseOnly => (AlphaValue::ONE, None),
            EvalMethod::Fixed(alpha) => (*alpha, None),
            EvalMethod::Dat(judge) => {
                let gold_text = pipeline
                    .corpus()
                    .paragraph(&query.gold_paragraph_id)
                    .map(|p| p.text.clone())
                    .ok_or_else(|| Error::ParagraphNotFound {
                        id: query.gold_paragraph_id.clone(),
                    })?;
                pipeline.judged_alpha(
                    &query.text,
                    Some(&gold_text),
                    judge,
                    &dense_pool,
                    &bm25_pool,
                )?
            }
        };
        let chosen_rank = grid.get(&chosen_alpha).copied().flatten();
        records.push(QueryEvalRecord {
            query_id: query.id.clone(),
            chosen_alpha,
            chosen_rank,
            gold_rank_by_alpha: grid,
            verdict,
        });
    }
    Ok(EvalReport::from_records(method.label(), records))
}

/// Precision@1 per grid alpha, from precomputed per-query grids.
pub fn alpha_p1_table(grids: &[BTreeMap<AlphaValue, Option<u32>>]) -> Vec<(AlphaValue, f64)> {
    AlphaValue::grid()
        .into_iter()
        .map(|alpha| {
            let hits = grids
                .iter()
                .filter(|grid| grid.get(&alpha).copied().flatten() == Some(1))
                .count();
            let p1 = if grids.is_empty() {
                0.0
            } else {
                hits as f64 / grids.len() as f64
            };
            (alpha, p1)
        })
        .collect()
}

/// The alpha maximizing Precision@1 over precomputed grids; ties go to
/// the smallest alpha.
pub fn grid_search_from_grids(
    grids: &[BTreeMap<AlphaValue, Option<u32>>],
) -> (AlphaValue, Vec<(AlphaValue, f64)>) {
    let table = alpha_p1_table(grids);
    let best = table
        .iter()
        .max_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("P@1 is finite")
                // On equal P@1 prefer the smaller alpha, which sorts
                // first in the grid; max_by keeps the later of equal
                // elements, so reverse the alpha comparison.
                .then_with(|| b.0.cmp(&a.0))
        })
        .map(|(alpha, _)| *alpha)
        .unwrap_or(AlphaValue::HALF);
    (best, table)
}

/// Exhaustive fixed-alpha search over `queries`.
pub fn grid_search_alpha(
    pipeline: &HybridPipeline<'_>,
    queries: &[QueryRecord],
    pool_n: usize,
) -> Result<(AlphaValue, Vec<(AlphaValue, f64)>)> {
    let mut grids = Vec::with_capacity(queries.len());
    for query in queries {
        grids.push(alpha_grid_ranks(pipeline, query, pool_n)?);
    }
    Ok(grid_search_from_grids(&grids))
}

/// Plain-text table of method rows and metric columns.
pub fn render_table(reports: &[&EvalReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<40} {:>8} {:>12} {:>8} {:>10} {:>10}\n",
        "Method", "Queries", "Precision@1", "MRR@20", "AlphaAcc", "Fallbacks"
    ));
    out.push_str(&format!("{}\n", "-".repeat(92)));
    for report in reports {
        out.push_str(&format!(
            "{:<40} {:>8} {:>12.4} {:>8.4} {:>10.4} {:>10}\n",
            report.method_label,
            report.n_queries,
            report.precision_at_1,
            report.mrr_at_20,
            report.alpha_selection_accuracy,
            report.n_fallback_verdicts
        ));
    }
    out
}
