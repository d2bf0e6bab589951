//! Ranking knowledge for a query: BM25 over the corpus text, or exact inner
//! product over externally produced vectors. Also hosts the weak-supervision
//! relevance rule and the in-batch training objective.

mod bm25;
mod dense;
mod relevance;
mod training;

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::KnowledgeId;
use crate::error::Result;
use crate::io::{read_jsonl, round6, write_jsonl};

pub use bm25::{Bm25Index, Bm25Params};
pub use dense::{
    read_embeddings, read_query_vectors, write_embeddings_binary, write_embeddings_jsonl, DenseIndex, Embeddings,
    EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use relevance::{label_relevance, label_relevance_with, AnswerMatcher, MatchMode};
pub use training::{build_training_pairs, in_batch_batches, in_batch_nll, NllOutput, PairBuild, TrainingPair};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Query {
    pub question: String,
    pub caption: String,
    pub answers: Vec<String>,
}

impl Query {
    pub fn text(&self) -> String {
        build_query_text(&self.question, &self.caption)
    }
}

/// Question followed by the image caption, separated by one space.
pub fn build_query_text(question: &str, caption: &str) -> String {
    let (q, c) = (question.trim(), caption.trim());
    if c.is_empty() {
        q.to_string()
    } else {
        format!("{q} {c}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: KnowledgeId,
    pub score: f64,
}

/// Ranked hits for one query: scores non-increasing, ids distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    #[serde(rename = "qid")]
    pub query_id: String,
    pub hits: Vec<Hit>,
}

impl RetrievalResult {
    pub fn top(&self, k: usize) -> &[Hit] {
        &self.hits[..k.min(self.hits.len())]
    }
}

/// Ranking order: higher score first, then lower id. `-0.0` ties with `0.0`.
pub fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    (b.score + 0.0).total_cmp(&(a.score + 0.0)).then(a.id.cmp(&b.id))
}

/// Best `k` hits in [`rank_order`].
pub fn top_k(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    if k == 0 {
        return Vec::new();
    }
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, rank_order);
        hits.truncate(k);
    }
    hits.sort_unstable_by(rank_order);
    hits
}

/// Merge per-shard top-k lists into a global top-k.
pub fn merge_top_k(shards: impl IntoIterator<Item = Vec<Hit>>, k: usize) -> Vec<Hit> {
    top_k(shards.into_iter().flatten().collect(), k)
}

pub fn read_hits(path: &Path) -> Result<Vec<RetrievalResult>> {
    read_jsonl(path)
}

/// Write `{"qid", "hits": [{"id", "score"}]}` lines, scores at six
/// significant digits.
pub fn write_hits(path: &Path, results: &[RetrievalResult]) -> Result<()> {
    let rounded: Vec<RetrievalResult> = results
        .iter()
        .map(|r| RetrievalResult {
            query_id: r.query_id.clone(),
            hits: r
                .hits
                .iter()
                .map(|h| Hit {
                    id: h.id,
                    score: round6(h.score),
                })
                .collect(),
        })
        .collect();
    write_jsonl(path, &rounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn hit(id: u64, score: f64) -> Hit {
        Hit {
            id: KnowledgeId(id),
            score,
        }
    }

    #[test]
    fn negative_zero_ties_with_zero() {
        let ids: Vec<u64> = top_k(vec![hit(4, 0.0), hit(1, -0.0)], 2).iter().map(|h| h.id.0).collect();
        assert_eq!(ids, [1, 4]);
    }

    #[test]
    fn query_text_concatenation() {
        assert_eq!(
            build_query_text("what vehicle?", "a fire hydrant on street"),
            "what vehicle? a fire hydrant on street"
        );
        assert_eq!(build_query_text("q", ""), "q");
    }

    #[test]
    fn query_tokens_are_the_union_of_both_streams() {
        let (q, c) = ("What is this hydrant for?", "A red fire-hydrant, on the street.");
        let mut expected = tokenize(q);
        expected.extend(tokenize(c));
        assert_eq!(tokenize(&build_query_text(q, c)), expected);
    }

    #[test]
    fn top_k_orders_by_score_then_id() {
        let hits = vec![hit(3, 1.0), hit(1, 2.0), hit(2, 1.0), hit(0, 0.5)];
        let ids: Vec<u64> = top_k(hits.clone(), 3).iter().map(|h| h.id.0).collect();
        assert_eq!(ids, [1, 2, 3]);
        assert_eq!(top_k(hits.clone(), 10).len(), 4);
        assert!(top_k(hits, 0).is_empty());
    }

    #[test]
    fn shard_merge_matches_single_pass() {
        let all: Vec<Hit> = (0..50).map(|i| hit(i, ((i * 37) % 11) as f64)).collect();
        let shards: Vec<Vec<Hit>> = all.chunks(7).map(|c| top_k(c.to_vec(), 5)).collect();
        assert_eq!(merge_top_k(shards, 5), top_k(all, 5));
    }
}
