//! Property tests for the structural invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use dat_core::corpus::{
    sample_corpus, tokenize, Corpus, LanguageTag, Paragraph, QueryRecord, TokenizerKind,
};
use dat_core::dense::{cosine_similarity, EmbeddingVector};
use dat_core::fusion::{fuse, min_max_normalize, AlphaValue, ScoreSource};
use dat_core::sparse::ScoredList;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..12).prop_map(|words| words.join(" "))
}

fn corpus() -> impl Strategy<Value = Corpus> {
    (1usize..8, 0usize..6).prop_flat_map(|(n_paragraphs, n_queries)| {
        let paragraphs = prop::collection::vec(text(), n_paragraphs..=n_paragraphs);
        let queries = prop::collection::vec((text(), 0usize..n_paragraphs), n_queries..=n_queries);
        (paragraphs, queries).prop_map(|(ptexts, qspecs)| {
            let paragraphs: Vec<Paragraph> = ptexts
                .into_iter()
                .enumerate()
                .map(|(i, text)| Paragraph {
                    id: format!("p{i:02}"),
                    article_id: format!("art{}", i % 3),
                    text,
                })
                .collect();
            let queries: Vec<QueryRecord> = qspecs
                .into_iter()
                .enumerate()
                .map(|(i, (text, gold))| QueryRecord {
                    id: format!("q{i:02}"),
                    text,
                    gold_paragraph_id: format!("p{gold:02}"),
                })
                .collect();
            Corpus::new(paragraphs, queries, LanguageTag::English).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn native_format_roundtrips(corpus in corpus()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        corpus.save_native(&path).unwrap();
        let reloaded = Corpus::load_native(&path).unwrap();
        prop_assert_eq!(corpus, reloaded);
    }

    #[test]
    fn sampling_respects_budget_and_maximality(corpus in corpus(), max in 1usize..12, seed in 0u64..50) {
        let sampled = sample_corpus(&corpus, max, seed).unwrap();
        prop_assert!(sampled.n_queries() <= max);

        // Maximality: any unadmitted article would blow the budget.
        let mut question_count: BTreeMap<String, usize> = BTreeMap::new();
        for p in corpus.paragraphs() {
            question_count.entry(p.article_id.clone()).or_insert(0);
        }
        for q in corpus.queries() {
            let article = corpus.paragraph(&q.gold_paragraph_id).unwrap().article_id.clone();
            *question_count.entry(article).or_insert(0) += 1;
        }
        let admitted: std::collections::BTreeSet<String> =
            sampled.paragraphs().map(|p| p.article_id.clone()).collect();
        for (article, count) in &question_count {
            if !admitted.contains(article) {
                prop_assert!(sampled.n_queries() + count > max,
                    "article {} with {} questions was left out under budget {}",
                    article, count, max);
            }
        }

        // Determinism.
        let again = sample_corpus(&corpus, max, seed).unwrap();
        prop_assert_eq!(sampled, again);
    }

    #[test]
    fn word_lower_tokens_are_lowercase_alphanumeric(s in "\\PC{0,40}") {
        let tokens = tokenize(&s, &TokenizerKind::WordLower).unwrap();
        for t in &tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric));
            let lowered = t.to_lowercase();
            prop_assert_eq!(&lowered, t);
        }
        // Purity.
        prop_assert_eq!(tokens, tokenize(&s, &TokenizerKind::WordLower).unwrap());
    }

    #[test]
    fn cjk_runs_give_n_minus_one_bigrams(n in 1usize..10) {
        // A pure CJK run of length n contributes max(1, n-1) tokens.
        let run: String = "水分子中質高溫與鋯反"
            .chars().cycle().take(n).collect();
        let tokens = tokenize(&run, &TokenizerKind::CjkBigram).unwrap();
        prop_assert_eq!(tokens.len(), if n == 1 { 1 } else { n - 1 });
    }

    #[test]
    fn min_max_stays_in_unit_interval(scores in prop::collection::vec(-1e6f64..1e6, 0..20)) {
        let entries: Vec<(String, f64)> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("d{i:02}"), *s))
            .collect();
        let list = ScoredList::from_unsorted(entries);
        let norm = min_max_normalize(&list, ScoreSource::Dense);
        let values: Vec<f64> = norm.entries().values().copied().collect();
        for v in &values {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let distinct: std::collections::BTreeSet<u64> =
            scores.iter().map(|s| s.to_bits()).collect();
        if distinct.len() >= 2 {
            prop_assert!(values.contains(&1.0));
            prop_assert!(values.contains(&0.0));
        }
    }

    #[test]
    fn fused_scores_in_unit_interval_and_monotone_crossover(
        dense in prop::collection::vec(-100f64..100.0, 1..12),
        bm25 in prop::collection::vec(0f64..50.0, 1..12),
    ) {
        let dense_list = ScoredList::from_unsorted(
            dense.iter().enumerate().map(|(i, s)| (format!("d{i:02}"), *s)).collect());
        let bm25_list = ScoredList::from_unsorted(
            bm25.iter().enumerate().map(|(i, s)| (format!("d{i:02}"), *s)).collect());

        // Union scores at every alpha stay in [0, 1].
        for alpha in AlphaValue::grid() {
            for (_, score) in fuse(&dense_list, &bm25_list, alpha, 100).iter() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(score));
            }
        }

        // Fused scores are affine in alpha, so the sign of the gap
        // between any two documents flips at most once over the grid.
        let full: Vec<ScoredList> = AlphaValue::grid()
            .into_iter()
            .map(|alpha| fuse(&dense_list, &bm25_list, alpha, 100))
            .collect();
        let ids: Vec<String> = full[0].iter().map(|(id, _)| id.clone()).collect();
        for (i, a) in ids.iter().enumerate() {
            for b in ids.iter().skip(i + 1) {
                let mut signs = Vec::new();
                for ranking in &full {
                    let score_of = |target: &str| {
                        ranking.iter().find(|(id, _)| id == target).map(|(_, s)| *s).unwrap()
                    };
                    let gap = score_of(a) - score_of(b);
                    if gap != 0.0 {
                        signs.push(gap > 0.0);
                    }
                }
                let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
                prop_assert!(flips <= 1, "docs {a} and {b} crossed more than once");
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        a in prop::collection::vec(-10f64..10.0, 3..6),
        b in prop::collection::vec(-10f64..10.0, 3..6),
        lambda in 0.01f64..100.0,
    ) {
        prop_assume!(a.len() == b.len());
        prop_assume!(a.iter().any(|v| *v != 0.0) && b.iter().any(|v| *v != 0.0));
        let va = EmbeddingVector::new(a.clone()).unwrap();
        let vb = EmbeddingVector::new(b).unwrap();
        let scaled = EmbeddingVector::new(a.iter().map(|v| v * lambda).collect()).unwrap();
        let sym = (cosine_similarity(&va, &vb).unwrap()
            - cosine_similarity(&vb, &va).unwrap()).abs();
        prop_assert!(sym < 1e-12);
        let scale = (cosine_similarity(&va, &vb).unwrap()
            - cosine_similarity(&scaled, &vb).unwrap()).abs();
        prop_assert!(scale < 1e-9);
    }
}

/// Index statistics on 50 random documents match an independent recount
/// straight from the token lists.
#[test]
fn index_statistics_match_independent_recount() {
    use rand::{Rng, SeedableRng};
    use std::collections::{BTreeMap, BTreeSet};

    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(505);
    let vocab: Vec<String> = (0..30).map(|i| format!("t{i:02}")).collect();
    let docs: Vec<(String, Vec<String>)> = (0..50)
        .map(|d| {
            let len = rng.gen_range(1..=20);
            let tokens: Vec<String> = (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
                .collect();
            (format!("p{d:02}"), tokens)
        })
        .collect();

    let paragraphs: Vec<Paragraph> = docs
        .iter()
        .map(|(id, tokens)| Paragraph {
            id: id.clone(),
            article_id: "art".to_string(),
            text: tokens.join(" "),
        })
        .collect();
    let corpus = Corpus::new(paragraphs, vec![], LanguageTag::English).unwrap();
    let index = dat_core::sparse::build_index(
        &corpus,
        TokenizerKind::WordLower,
        dat_core::sparse::Bm25Params::default(),
    )
    .unwrap();

    // Recount df and average length directly.
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total_len = 0usize;
    for (_, tokens) in &docs {
        total_len += tokens.len();
        let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    assert_eq!(index.n_docs(), 50);
    assert!((index.avgdl() - total_len as f64 / 50.0).abs() < 1e-12);
    for term in &vocab {
        assert_eq!(
            index.doc_freq(term),
            df.get(term.as_str()).copied().unwrap_or(0),
            "df for {term}"
        );
    }
    for (id, tokens) in &docs {
        assert_eq!(index.doc_len(id), Some(tokens.len() as u32));
    }
}

/// Dense top-k equals an exhaustive cosine-and-sort oracle on a random
/// 30-document index.
#[test]
fn dense_search_matches_exhaustive_sort_oracle() {
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(303);
    let mut vectors = BTreeMap::new();
    for d in 0..30 {
        let values: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        vectors.insert(
            format!("p{d:02}"),
            EmbeddingVector::new(values).unwrap(),
        );
    }
    let index = dat_core::dense::DenseIndex::from_vectors(vectors.clone(), "rand").unwrap();

    for _ in 0..20 {
        let query =
            EmbeddingVector::new((0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let got = index.search(&query, 5).unwrap();

        let mut expected: Vec<(String, f64)> = vectors
            .iter()
            .map(|(id, v)| (id.clone(), cosine_similarity(&query, v).unwrap()))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        expected.truncate(5);

        assert_eq!(got.len(), 5);
        for (g, e) in got.iter().zip(expected.iter()) {
            assert_eq!(g.0, e.0);
            assert_eq!(g.1.to_bits(), e.1.to_bits());
        }
    }
}
