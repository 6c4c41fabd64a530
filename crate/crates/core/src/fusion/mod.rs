//! Score fusion: min-max normalization and the weighted combination of
//! dense and BM25 rankings.

mod alpha;
mod pipeline;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sparse::ScoredList;

pub use alpha::{compute_alpha, AlphaValue};
pub use pipeline::{HybridPipeline, HybridResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Dense,
    Bm25,
}

/// Scores rescaled into [0, 1] over one retrieval method's candidate
/// list.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedList {
    entries: BTreeMap<String, f64>,
    source: ScoreSource,
}

impl NormalizedList {
    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn source(&self) -> ScoreSource {
        self.source
    }

    pub fn score(&self, paragraph_id: &str) -> Option<f64> {
        self.entries.get(paragraph_id).copied()
    }
}

/// Min-max scaling over the list's own entries: `(s - min) / (max - min)`.
/// A list with no score spread (including singletons) maps everything to
/// 0.5 — "no relative information" — and an empty list stays empty.
pub fn min_max_normalize(scored: &ScoredList, source: ScoreSource) -> NormalizedList {
    let mut entries = BTreeMap::new();
    if !scored.is_empty() {
        // Entries are ordered descending, so max is first and min last.
        let max = scored.entries()[0].1;
        let min = scored.entries()[scored.len() - 1].1;
        let spread = max - min;
        for (id, raw) in scored.iter() {
            let normalized = if spread == 0.0 {
                0.5
            } else {
                (raw - min) / spread
            };
            entries.insert(id.clone(), normalized);
        }
    }
    NormalizedList { entries, source }
}

/// Weighted fusion of the two normalized lists over the union of their
/// ids: `alpha * dense + (1 - alpha) * bm25`, with ids missing from one
/// list contributing 0 on that side. Returns the top `k` in standard
/// order.
pub fn fuse(dense: &ScoredList, bm25: &ScoredList, alpha: AlphaValue, k: usize) -> ScoredList {
    let dense_norm = min_max_normalize(dense, ScoreSource::Dense);
    let bm25_norm = min_max_normalize(bm25, ScoreSource::Bm25);
    fuse_normalized(&dense_norm, &bm25_norm, alpha, k)
}

pub(crate) fn fuse_normalized(
    dense: &NormalizedList,
    bm25: &NormalizedList,
    alpha: AlphaValue,
    k: usize,
) -> ScoredList {
    let a = alpha.value();
    let mut fused: BTreeMap<&str, f64> = BTreeMap::new();
    for (id, &score) in dense.entries() {
        fused.insert(id, a * score);
    }
    for (id, &score) in bm25.entries() {
        *fused.entry(id).or_insert(0.0) += (1.0 - a) * score;
    }
    let entries: Vec<(String, f64)> = fused
        .into_iter()
        .map(|(id, score)| (id.to_string(), score))
        .collect();
    ScoredList::from_unsorted(entries).truncated(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(entries: &[(&str, f64)]) -> ScoredList {
        ScoredList::from_unsorted(entries.iter().map(|(id, s)| (id.to_string(), *s)).collect())
    }

    #[test]
    fn min_max_maps_range_to_unit_interval() {
        let list = scored(&[("a", 2.0), ("b", 4.0), ("c", 6.0)]);
        let norm = min_max_normalize(&list, ScoreSource::Bm25);
        assert_eq!(norm.score("a"), Some(0.0));
        assert_eq!(norm.score("b"), Some(0.5));
        assert_eq!(norm.score("c"), Some(1.0));
    }

    #[test]
    fn min_max_singleton_maps_to_half() {
        let list = scored(&[("only", 7.3)]);
        let norm = min_max_normalize(&list, ScoreSource::Dense);
        assert_eq!(norm.score("only"), Some(0.5));
    }

    #[test]
    fn min_max_constant_scores_map_to_half() {
        let list = scored(&[("a", 3.0), ("b", 3.0)]);
        let norm = min_max_normalize(&list, ScoreSource::Dense);
        assert_eq!(norm.score("a"), Some(0.5));
        assert_eq!(norm.score("b"), Some(0.5));
    }

    #[test]
    fn min_max_empty_stays_empty() {
        let norm = min_max_normalize(&ScoredList::empty(), ScoreSource::Dense);
        assert!(norm.entries().is_empty());
    }

    #[test]
    fn fuse_worked_three_doc_case() {
        // dense raw {A: 0.9, B: 0.5, C: 0.1} -> norm {1, 0.5, 0};
        // bm25 raw {B: 10, C: 2} -> norm {B: 1, C: 0};
        // alpha 0.6: R(A) = 0.6, R(B) = 0.7, R(C) = 0 -> order B, A, C.
        let dense = scored(&[("A", 0.9), ("B", 0.5), ("C", 0.1)]);
        let bm25 = scored(&[("B", 10.0), ("C", 2.0)]);
        let fused = fuse(&dense, &bm25, AlphaValue::from_tenths(6).unwrap(), 10);
        let ids: Vec<&str> = fused.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["B", "A", "C"]);
        assert!((fused.entries()[0].1 - 0.7).abs() < 1e-12);
        assert!((fused.entries()[1].1 - 0.6).abs() < 1e-12);
        assert!((fused.entries()[2].1 - 0.0).abs() < 1e-12);
    }

    #[test]
    fn fuse_alpha_one_reproduces_dense_ordering_over_union() {
        let dense = scored(&[("A", 0.9), ("B", 0.5), ("C", 0.1)]);
        let bm25 = scored(&[("D", 10.0), ("B", 2.0)]);
        let fused = fuse(&dense, &bm25, AlphaValue::ONE, 10);
        let ids: Vec<&str> = fused.iter().map(|(id, _)| id.as_str()).collect();
        // Dense-present ids in dense order, then the dense-absent id at 0.
        assert_eq!(ids, ["A", "B", "C", "D"]);
        assert_eq!(fused.entries()[3].1, 0.0);
    }

    #[test]
    fn fuse_alpha_zero_reproduces_bm25_ordering_over_union() {
        let dense = scored(&[("A", 0.9), ("B", 0.5)]);
        let bm25 = scored(&[("D", 10.0), ("B", 2.0), ("E", 1.0)]);
        let fused = fuse(&dense, &bm25, AlphaValue::ZERO, 10);
        let ids: Vec<&str> = fused.iter().map(|(id, _)| id.as_str()).collect();
        // E is the bm25 minimum (normalized 0), so it ties with the
        // bm25-absent A at score 0 and the id tie-break puts A first.
        assert_eq!(ids, ["D", "B", "A", "E"]);
    }

    #[test]
    fn fuse_both_empty_is_empty() {
        let fused = fuse(
            &ScoredList::empty(),
            &ScoredList::empty(),
            AlphaValue::HALF,
            5,
        );
        assert!(fused.is_empty());
    }

    #[test]
    fn fused_scores_stay_in_unit_interval() {
        let dense = scored(&[("a", -3.0), ("b", 14.0), ("c", 2.0)]);
        let bm25 = scored(&[("b", 100.0), ("d", 7.0)]);
        for alpha in AlphaValue::grid() {
            for (_, score) in fuse(&dense, &bm25, alpha, 10).iter() {
                assert!((0.0..=1.0).contains(score));
            }
        }
    }
}
