mod oracle;

use proptest::prelude::*;
use vrr_core::corpus::{
    clean_corpus, corpus_from_texts, dedup, filter_knowledge, ingest, load_corpus, save_corpus, BadWords,
    KnowledgeEntry, KnowledgeId, RawSearchResult, SearchItem, SourceQuery, Verdict, WindowRatioFilter,
};

const BAD: &[&str] = &["damn", "bad word"];

fn noisy_text() -> impl Strategy<Value = String> {
    let word = prop::sample::select(vec![
        "the", "dog", "Damn", "damned", "bad", "word.", "Words", "{x}", "JavaScript", "javascripts", "Lorem",
        "ipsum", "lorem", "café", "(damn)",
    ]);
    prop::collection::vec(word, 1..12).prop_map(|w| w.join(" "))
}

fn entries(texts: &[String]) -> Vec<KnowledgeEntry> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| KnowledgeEntry {
            id: KnowledgeId(i as u64),
            text: t.clone(),
            source_url: format!("http://example.com/{i}"),
            source_query: SourceQuery {
                question: format!("question {i}?"),
                answer: "a\"nswer".into(),
            },
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cleaning_matches_brute_force(texts in prop::collection::vec(noisy_text(), 0..30)) {
        let corpus = corpus_from_texts(texts.clone());
        let (cleaned, removed) = clean_corpus(corpus, &BadWords::from_terms(BAD.iter().copied()));
        let expected: Vec<(u64, String)> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let lower = t.to_lowercase();
                !(t.contains('{')
                    || lower.contains("javascript")
                    || lower.contains("lorem ipsum")
                    || oracle::has_bad_word(t, BAD))
            })
            .map(|(i, t)| (i as u64, t.clone()))
            .collect();
        let got: Vec<(u64, String)> = cleaned.entries().iter().map(|e| (e.id.0, e.text.clone())).collect();
        prop_assert_eq!(removed, texts.len() - expected.len());
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn dedup_is_idempotent(texts in prop::collection::vec("[aAbB ]{0,6}", 0..30)) {
        let once = dedup(entries(&texts));
        let twice = dedup(once.entries().to_vec());
        prop_assert_eq!(&once, &twice);
        let ids: Vec<u64> = once.ids().map(|i| i.0).collect();
        prop_assert_eq!(ids, (0..once.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn save_load_round_trip(texts in prop::collection::vec("\\PC{0,40}", 0..20)) {
        let corpus = dedup(entries(&texts));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        prop_assert_eq!(load_corpus(&path).unwrap(), corpus);
    }

    #[test]
    fn word_bounds_are_inclusive(n in 0usize..320) {
        let text = vec!["word"; n].join(" ");
        let kept = matches!(filter_knowledge(&text, &WindowRatioFilter::default()), Verdict::Keep(_));
        prop_assert_eq!(kept, (10..=300).contains(&n));
    }

    #[test]
    fn ingested_entries_pass_the_filter(
        snippets in prop::collection::vec(prop::collection::vec("[a-zé]{1,8}", 5..40), 1..20),
    ) {
        let results = vec![RawSearchResult {
            query_question: "q?".into(),
            query_answer: "a".into(),
            items: snippets
                .iter()
                .map(|s| SearchItem { title: String::new(), link: String::new(), snippet: s.join(" ") })
                .collect(),
        }];
        let filter = WindowRatioFilter::default();
        let (corpus, stats) = ingest(&results, &filter);
        prop_assert_eq!(stats.kept, corpus.len());
        for e in corpus.entries() {
            prop_assert_eq!(filter_knowledge(&e.text, &filter), Verdict::Keep(e.text.clone()));
        }
        prop_assert_eq!(&dedup(corpus.entries().to_vec()), &corpus);
    }
}
