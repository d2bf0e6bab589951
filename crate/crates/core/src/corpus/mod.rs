//! Knowledge corpus construction from search snippets.
//!
//! The flow is: [`prepare_queries`] produces one search query per distinct
//! answer; the search results are fetched elsewhere and read back with
//! [`parse_search_results`]; [`ingest`] filters each snippet and deduplicates
//! the lot into a [`Corpus`]; [`clean_corpus`] applies the bad-word and
//! boilerplate rules.

mod clean;
mod filter;
mod search;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{parse_jsonl, write_jsonl};
use crate::text::collapse_whitespace;

pub use clean::{clean_corpus, match_clean_rule, BadWords, CleanRule};
pub use filter::{filter_knowledge, LanguageFilter, RejectReason, Verdict, WindowRatioFilter, MAX_WORDS, MIN_WORDS};
pub use search::{parse_search_results, RawSearchResult, SearchItem, SearchParse, MAX_ITEMS_PER_QUERY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeId(pub u64);

impl fmt::Display for KnowledgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for KnowledgeId {
    fn from(v: u64) -> Self {
        KnowledgeId(v)
    }
}

/// The (question, answer) search query a snippet came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceQuery {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeEntry {
    pub id: KnowledgeId,
    pub text: String,
    pub source_url: String,
    pub source_query: SourceQuery,
}

/// An immutable, id-ordered knowledge corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    entries: Vec<KnowledgeEntry>,
}

impl Corpus {
    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<KnowledgeEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: KnowledgeId) -> Option<&KnowledgeEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn text(&self, id: KnowledgeId) -> Option<&str> {
        self.get(id).map(|e| e.text.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = KnowledgeId> + '_ {
        self.entries.iter().map(|e| e.id)
    }
}

/// Key under which two snippets count as duplicates.
pub fn dedup_key(text: &str) -> String {
    collapse_whitespace(text).to_lowercase()
}

/// Keep the first occurrence of each normalized text and renumber densely
/// from zero in input order.
pub fn dedup(entries: Vec<KnowledgeEntry>) -> Corpus {
    let mut seen = HashSet::with_capacity(entries.len());
    let mut kept = Vec::with_capacity(entries.len());
    for mut entry in entries {
        if seen.insert(dedup_key(&entry.text)) {
            entry.id = KnowledgeId(kept.len() as u64);
            kept.push(entry);
        }
    }
    Corpus { entries: kept }
}

/// One query per distinct answer, in first-seen order.
pub fn prepare_queries(question: &str, answers: &[impl AsRef<str>]) -> Result<Vec<(String, String)>> {
    let question = question.trim();
    if question.is_empty() {
        return Err(Error::Invalid("question is empty".into()));
    }
    let mut seen = HashSet::new();
    let queries: Vec<_> = answers
        .iter()
        .map(|a| a.as_ref().trim())
        .filter(|a| !a.is_empty() && seen.insert(a.to_string()))
        .map(|a| (question.to_string(), a.to_string()))
        .collect();
    if queries.is_empty() {
        return Err(Error::NoQueries);
    }
    Ok(queries)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub queries: usize,
    pub snippets: usize,
    pub duplicate_in_query: usize,
    pub too_short: usize,
    pub too_long: usize,
    pub non_english: usize,
    pub duplicate_global: usize,
    pub kept: usize,
}

/// Filter and deduplicate parsed search results into a corpus. Duplicates
/// are removed within each query first, then across the whole corpus.
pub fn ingest(results: &[RawSearchResult], language: &dyn LanguageFilter) -> (Corpus, IngestStats) {
    let mut stats = IngestStats {
        queries: results.len(),
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for result in results {
        let mut local = HashSet::new();
        for item in &result.items {
            stats.snippets += 1;
            if !local.insert(dedup_key(&item.snippet)) {
                stats.duplicate_in_query += 1;
                continue;
            }
            match filter_knowledge(&item.snippet, language) {
                Verdict::Keep(text) => candidates.push(KnowledgeEntry {
                    id: KnowledgeId(candidates.len() as u64),
                    text,
                    source_url: item.link.clone(),
                    source_query: SourceQuery {
                        question: result.query_question.clone(),
                        answer: result.query_answer.clone(),
                    },
                }),
                Verdict::Reject(RejectReason::TooShort) => stats.too_short += 1,
                Verdict::Reject(RejectReason::TooLong) => stats.too_long += 1,
                Verdict::Reject(RejectReason::NonEnglish) => stats.non_english += 1,
            }
        }
    }
    let before = candidates.len();
    let corpus = dedup(candidates);
    stats.duplicate_global = before - corpus.len();
    stats.kept = corpus.len();
    (corpus, stats)
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    id: u64,
    text: String,
    url: String,
    q: String,
    a: String,
}

/// Write the corpus as JSON Lines `{"id", "text", "url", "q", "a"}`.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let rows: Vec<CorpusRecord> = corpus
        .entries
        .iter()
        .map(|e| CorpusRecord {
            id: e.id.0,
            text: e.text.clone(),
            url: e.source_url.clone(),
            q: e.source_query.question.clone(),
            a: e.source_query.answer.clone(),
        })
        .collect();
    write_jsonl(path, &rows)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<CorpusRecord> = parse_jsonl(BufReader::new(file))?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if let Some(prev) = entries.last().map(|e: &KnowledgeEntry| e.id) {
            if row.id <= prev.0 {
                return Err(Error::parse(i + 1, format!("id {} not strictly increasing", row.id)));
            }
        }
        entries.push(KnowledgeEntry {
            id: KnowledgeId(row.id),
            text: row.text,
            source_url: row.url,
            source_query: SourceQuery {
                question: row.q,
                answer: row.a,
            },
        });
    }
    Ok(Corpus { entries })
}

impl FromIterator<KnowledgeEntry> for Corpus {
    /// Collect entries as given; panics if ids are not strictly increasing.
    fn from_iter<T: IntoIterator<Item = KnowledgeEntry>>(iter: T) -> Self {
        let entries: Vec<_> = iter.into_iter().collect();
        assert!(
            entries.windows(2).all(|w| w[0].id < w[1].id),
            "corpus ids must be strictly increasing"
        );
        Corpus { entries }
    }
}

/// Build a corpus straight from texts with ids `0..n`. No filtering or dedup.
pub fn corpus_from_texts<I, S>(texts: I) -> Corpus
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| KnowledgeEntry {
            id: KnowledgeId(i as u64),
            text: t.into(),
            source_url: String::new(),
            source_query: SourceQuery::default(),
        })
        .collect()
}
