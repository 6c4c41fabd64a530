//! Evaluation protocol: Precision@1, MRR@20, alpha-selection accuracy,
//! optimal-alpha sets, and the hybrid-sensitive query subset.
//!
//! Every query is evaluated against the full alpha grid (eleven fused
//! rankings), so a single pass supports all methods: a method only
//! differs in which alpha it *chooses* per query.

mod harness;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::AlphaValue;
use crate::judge::JudgeVerdict;
use crate::sparse::ScoredList;

pub use harness::{
    alpha_grid_ranks, alpha_p1_table, grid_search_alpha, grid_search_from_grids, render_table,
    run_eval, EvalMethod,
};

/// Everything recorded about one query: the gold paragraph's rank under
/// every grid alpha, the alpha the method chose, and (for judged
/// methods) the verdict behind that choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvalRecord {
    pub query_id: String,
    pub chosen_alpha: AlphaValue,
    pub chosen_rank: Option<u32>,
    #[serde(with = "grid_serde")]
    pub gold_rank_by_alpha: BTreeMap<AlphaValue, Option<u32>>,
    pub verdict: Option<JudgeVerdict>,
}

impl QueryEvalRecord {
    /// Checks the structural invariants: a complete 11-value grid, and
    /// `chosen_rank` equal to the grid entry at `chosen_alpha`.
    pub fn validate(&self) -> Result<()> {
        if self.gold_rank_by_alpha.len() != 11 {
            return Err(Error::InvalidInput(format!(
                "record {} has {} grid entries",
                self.query_id,
                self.gold_rank_by_alpha.len()
            )));
        }
        let grid_rank = self
            .gold_rank_by_alpha
            .get(&self.chosen_alpha)
            .copied()
            .flatten();
        if grid_rank != self.chosen_rank {
            return Err(Error::InvalidInput(format!(
                "record {}: chosen_rank {:?} disagrees with grid {:?} at alpha {}",
                self.query_id, self.chosen_rank, grid_rank, self.chosen_alpha
            )));
        }
        Ok(())
    }
}

/// Aggregate metrics plus the per-query records they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method_label: String,
    pub n_queries: usize,
    pub n_fallback_verdicts: usize,
    pub precision_at_1: f64,
    pub mrr_at_20: f64,
    pub alpha_selection_accuracy: f64,
    pub records: Vec<QueryEvalRecord>,
}

impl EvalReport {
    /// Assemble a report from records, computing the aggregates.
    pub fn from_records(method_label: String, mut records: Vec<QueryEvalRecord>) -> Self {
        records.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        EvalReport {
            n_queries: records.len(),
            n_fallback_verdicts: records
                .iter()
                .filter(|r| r.verdict.as_ref().is_some_and(|v| v.is_fallback))
                .count(),
            precision_at_1: precision_at_1(&records),
            mrr_at_20: mrr_at_20(&records),
            alpha_selection_accuracy: alpha_selection_accuracy(&records),
            method_label,
            records,
        }
    }

    /// Restrict the report to a query-id subset, recomputing aggregates.
    pub fn filtered(&self, ids: &BTreeSet<String>, method_label: String) -> EvalReport {
        let records: Vec<QueryEvalRecord> = self
            .records
            .iter()
            .filter(|r| ids.contains(&r.query_id))
            .cloned()
            .collect();
        EvalReport::from_records(method_label, records)
    }

    /// Recompute every aggregate from the records and compare against
    /// the stored values (tolerance 1e-12).
    pub fn verify_self_consistent(&self) -> Result<()> {
        for record in &self.records {
            record.validate()?;
        }
        let recomputed = EvalReport::from_records(self.method_label.clone(), self.records.clone());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        if self.n_queries != recomputed.n_queries
            || self.n_fallback_verdicts != recomputed.n_fallback_verdicts
            || !close(self.precision_at_1, recomputed.precision_at_1)
            || !close(self.mrr_at_20, recomputed.mrr_at_20)
            || !close(
                self.alpha_selection_accuracy,
                recomputed.alpha_selection_accuracy,
            )
        {
            return Err(Error::InvalidInput(format!(
                "report `{}` aggregates disagree with its records",
                self.method_label
            )));
        }
        Ok(())
    }
}

mod grid_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<AlphaValue, Option<u32>>,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<(f64, Option<u32>)> = map.iter().map(|(a, r)| (a.value(), *r)).collect();
        serde::Serialize::serialize(&pairs, serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<BTreeMap<AlphaValue, Option<u32>>, D::Error> {
        let pairs: Vec<(f64, Option<u32>)> = serde::Deserialize::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for (value, rank) in pairs {
            let alpha = AlphaValue::from_f64(value).map_err(D::Error::custom)?;
            map.insert(alpha, rank);
        }
        Ok(map)
    }
}

/// 1-based position of `gold_id` in a ranking; `None` when absent.
pub fn rank_of_gold(ranking: &ScoredList, gold_id: &str) -> Option<u32> {
    ranking
        .iter()
        .position(|(id, _)| id == gold_id)
        .map(|i| (i + 1) as u32)
}

/// Fraction of queries whose chosen ranking put the gold paragraph
/// first. Empty input yields 0.
pub fn precision_at_1(records: &[QueryEvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records.iter().filter(|r| r.chosen_rank == Some(1)).count();
    hits as f64 / records.len() as f64
}

/// Mean reciprocal rank, counting only ranks up to 20; rank 21 and
/// beyond (and absent gold) contribute exactly 0.
pub fn mrr_at_20(records: &[QueryEvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let sum: f64 = records
        .iter()
        .map(|r| match r.chosen_rank {
            Some(rank) if rank <= 20 => 1.0 / f64::from(rank),
            _ => 0.0,
        })
        .sum();
    sum / records.len() as f64
}

/// The grid alphas minimizing the gold rank, with absent gold treated as
/// worse than any finite rank. When no alpha retrieves the gold at all,
/// every alpha is (vacuously) optimal and the full grid is returned.
pub fn optimal_alpha_set(grid: &BTreeMap<AlphaValue, Option<u32>>) -> BTreeSet<AlphaValue> {
    let best = grid.values().copied().flatten().min();
    match best {
        None => grid.keys().copied().collect(),
        Some(best_rank) => grid
            .iter()
            .filter(|(_, rank)| **rank == Some(best_rank))
            .map(|(alpha, _)| *alpha)
            .collect(),
    }
}

/// Fraction of queries whose chosen alpha lies in the optimal set.
pub fn alpha_selection_accuracy(records: &[QueryEvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records
        .iter()
        .filter(|r| optimal_alpha_set(&r.gold_rank_by_alpha).contains(&r.chosen_alpha))
        .count();
    hits as f64 / records.len() as f64
}

/// Queries for which the alpha choice decides rank-1 success: some grid
/// alpha ranks the gold first and some does not.
pub fn hybrid_sensitive_subset(records: &[QueryEvalRecord]) -> BTreeSet<String> {
    records
        .iter()
        .filter(|r| {
            let ranks = r.gold_rank_by_alpha.values();
            let any_hit = ranks.clone().any(|rank| *rank == Some(1));
            let any_miss = ranks.clone().any(|rank| *rank != Some(1));
            any_hit && any_miss
        })
        .map(|r| r.query_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_of(ranks: [Option<u32>; 11]) -> BTreeMap<AlphaValue, Option<u32>> {
        AlphaValue::grid().into_iter().zip(ranks).collect()
    }

    fn record(id: &str, chosen_tenths: u8, ranks: [Option<u32>; 11]) -> QueryEvalRecord {
        let grid = grid_of(ranks);
        let chosen_alpha = AlphaValue::from_tenths(chosen_tenths).unwrap();
        let chosen_rank = grid[&chosen_alpha];
        QueryEvalRecord {
            query_id: id.to_string(),
            chosen_alpha,
            chosen_rank,
            gold_rank_by_alpha: grid,
            verdict: None,
        }
    }

    #[test]
    fn rank_of_gold_positions() {
        let ranking = ScoredList::from_unsorted(vec![
            ("a".into(), 3.0),
            ("b".into(), 2.0),
            ("c".into(), 1.0),
        ]);
        assert_eq!(rank_of_gold(&ranking, "a"), Some(1));
        assert_eq!(rank_of_gold(&ranking, "c"), Some(3));
        assert_eq!(rank_of_gold(&ranking, "zz"), None);
    }

    #[test]
    fn precision_counts_rank_one_only() {
        let records = vec![
            record("q1", 5, [Some(1); 11]),
            record("q2", 5, [Some(1); 11]),
            record("q3", 5, [Some(3); 11]),
        ];
        assert!((precision_at_1(&records) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mrr_example_with_none() {
        let records = vec![
            record("q1", 0, [Some(1); 11]),
            record("q2", 0, [Some(4); 11]),
            record("q3", 0, [None; 11]),
        ];
        let expected = (1.0 + 0.25 + 0.0) / 3.0;
        assert!((mrr_at_20(&records) - expected).abs() < 1e-15);
    }

    #[test]
    fn mrr_all_rank_one_is_one() {
        let records = vec![record("q", 3, [Some(1); 11])];
        assert_eq!(mrr_at_20(&records), 1.0);
    }

    #[test]
    fn rank_21_contributes_exactly_zero() {
        let records = vec![
            record("q1", 0, [Some(21); 11]),
            record("q2", 0, [Some(20); 11]),
        ];
        let expected = (0.0 + 1.0 / 20.0) / 2.0;
        assert_eq!(mrr_at_20(&records), expected);
    }

    #[test]
    fn optimal_set_is_the_argmin() {
        let grid = grid_of([
            Some(3),
            Some(2),
            Some(2),
            Some(2),
            Some(2),
            Some(1),
            Some(2),
            Some(2),
            Some(2),
            Some(2),
            Some(1),
        ]);
        let set = optimal_alpha_set(&grid);
        let expected: BTreeSet<AlphaValue> = [
            AlphaValue::from_tenths(5).unwrap(),
            AlphaValue::from_tenths(10).unwrap(),
        ]
        .into();
        assert_eq!(set, expected);
    }

    #[test]
    fn optimal_set_all_equal_is_full_grid() {
        let grid = grid_of([Some(2); 11]);
        assert_eq!(optimal_alpha_set(&grid).len(), 11);
    }

    #[test]
    fn optimal_set_all_none_is_full_grid() {
        let grid = grid_of([None; 11]);
        assert_eq!(optimal_alpha_set(&grid).len(), 11);
    }

    #[test]
    fn none_is_worse_than_any_finite_rank() {
        let mut ranks = [None; 11];
        ranks[7] = Some(500);
        let set = optimal_alpha_set(&grid_of(ranks));
        assert_eq!(set.len(), 1);
        assert!(set.contains(&AlphaValue::from_tenths(7).unwrap()));
    }

    #[test]
    fn hybrid_sensitive_definition() {
        // All rank 1 everywhere: excluded. Never rank 1: excluded.
        // Rank 1 somewhere but not everywhere: included.
        let mut mixed = [Some(2); 11];
        mixed[0] = Some(1);
        let records = vec![
            record("always", 0, [Some(1); 11]),
            record("never", 0, [Some(2); 11]),
            record("mixed", 0, mixed),
        ];
        let subset = hybrid_sensitive_subset(&records);
        assert_eq!(subset.len(), 1);
        assert!(subset.contains("mixed"));
    }

    #[test]
    fn alpha_accuracy_of_argmin_policy_is_one() {
        let mut grids = Vec::new();
        for i in 0..10u32 {
            let mut ranks = [Some(5); 11];
            ranks[(i % 11) as usize] = Some(1);
            grids.push(ranks);
        }
        let records: Vec<QueryEvalRecord> = grids
            .iter()
            .enumerate()
            .map(|(i, ranks)| {
                // Choose an argmin alpha deliberately.
                let grid = grid_of(*ranks);
                let best = *optimal_alpha_set(&grid).iter().next().unwrap();
                record(&format!("q{i}"), best.tenths(), *ranks)
            })
            .collect();
        assert_eq!(alpha_selection_accuracy(&records), 1.0);
    }

    #[test]
    fn report_self_consistency_checks() {
        let records = vec![record("q1", 5, [Some(1); 11]), record("q2", 0, [None; 11])];
        let report = EvalReport::from_records("test".to_string(), records);
        report.verify_self_consistent().unwrap();

        let mut broken = report.clone();
        broken.precision_at_1 += 0.1;
        assert!(broken.verify_self_consistent().is_err());
    }

    #[test]
    fn record_validation_catches_grid_mismatch() {
        let mut r = record("q", 5, [Some(2); 11]);
        r.chosen_rank = Some(1);
        assert!(r.validate().is_err());
    }
}
