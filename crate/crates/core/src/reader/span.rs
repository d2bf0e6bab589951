//! Extractive span decoding and weak-supervision span targets.

use serde::{Deserialize, Serialize};

use super::{AnswerCandidate, UNANSWERABLE};
use crate::corpus::KnowledgeId;
use crate::error::{Error, Result};
use crate::text::{find_token_seq, normalize_token, normalize_tokens};

pub const DEFAULT_MAX_SPAN_LEN: usize = 10;

/// Per-token start and end scores. Position 0 is the injected
/// "unanswerable" token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub tokens: Vec<String>,
    #[serde(rename = "start")]
    pub start_scores: Vec<f64>,
    #[serde(rename = "end")]
    pub end_scores: Vec<f64>,
}

impl SpanScores {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        if self.start_scores.len() != self.tokens.len() || self.end_scores.len() != self.tokens.len() {
            return Err(Error::Shape(format!(
                "{} tokens, {} start scores, {} end scores",
                self.tokens.len(),
                self.start_scores.len(),
                self.end_scores.len()
            )));
        }
        Ok(())
    }
}

fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    xs.iter().map(|&x| x - log_norm).collect()
}

/// Highest `start[s] + end[e]` over `0 < s ≤ e`, `e − s < max_span_len`;
/// ties keep the smallest `s`, then the smallest `e`.
pub fn best_span(scores: &SpanScores, max_span_len: usize) -> Option<(usize, usize, f64)> {
    let n = scores.tokens.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for s in 1..n {
        let last = (s + max_span_len - 1).min(n - 1);
        for e in s..=last {
            let sum = scores.start_scores[s] + scores.end_scores[e];
            if best.is_none_or(|(_, _, b)| sum > b) {
                best = Some((s, e, sum));
            }
        }
    }
    best
}

fn span_candidate(scores: &SpanScores, s: usize, e: usize, knowledge_id: KnowledgeId) -> AnswerCandidate {
    let ls = log_softmax(&scores.start_scores);
    let le = log_softmax(&scores.end_scores);
    AnswerCandidate {
        text: scores.tokens[s..=e].join(" "),
        score: (ls[s] + le[e]).exp(),
        knowledge_id,
        span: Some((s, e)),
    }
}

/// Best answer span, or [`UNANSWERABLE`] when the sentinel's start+end sum
/// beats every valid span. Score is the product of start and end softmax
/// probabilities.
pub fn decode_span(scores: &SpanScores, max_span_len: usize, knowledge_id: KnowledgeId) -> Result<AnswerCandidate> {
    scores.validate()?;
    if max_span_len == 0 {
        return Err(Error::Invalid("max_span_len must be at least 1".into()));
    }
    let sentinel = scores.start_scores[0] + scores.end_scores[0];
    match best_span(scores, max_span_len) {
        Some((s, e, sum)) if sum >= sentinel => Ok(span_candidate(scores, s, e, knowledge_id)),
        _ => {
            let ls = log_softmax(&scores.start_scores);
            let le = log_softmax(&scores.end_scores);
            Ok(AnswerCandidate {
                text: UNANSWERABLE.to_string(),
                score: (ls[0] + le[0]).exp(),
                knowledge_id,
                span: Some((0, 0)),
            })
        }
    }
}

/// Best real span ignoring the sentinel, for when every knowledge was
/// judged unanswerable.
pub fn decode_span_relaxed(
    scores: &SpanScores,
    max_span_len: usize,
    knowledge_id: KnowledgeId,
) -> Result<Option<AnswerCandidate>> {
    scores.validate()?;
    if max_span_len == 0 {
        return Err(Error::Invalid("max_span_len must be at least 1".into()));
    }
    Ok(best_span(scores, max_span_len).map(|(s, e, _)| span_candidate(scores, s, e, knowledge_id)))
}

/// Training target for one (knowledge, answer) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanTarget {
    pub knowledge_id: KnowledgeId,
    /// Inclusive token spans, ascending. Empty for an unanswerable target.
    pub spans: Vec<(usize, usize)>,
    /// The answer, or [`UNANSWERABLE`] when it does not occur.
    pub answer: String,
}

impl SpanTarget {
    pub fn is_unanswerable(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Every token-boundary occurrence of `answer` in the knowledge tokens.
pub fn locate_span_targets<S: AsRef<str>>(knowledge_id: KnowledgeId, tokens: &[S], answer: &str) -> SpanTarget {
    let hay: Vec<String> = tokens.iter().map(|t| normalize_token(t.as_ref())).collect();
    let needle = normalize_tokens(answer);
    let spans: Vec<(usize, usize)> = find_token_seq(&hay, &needle)
        .into_iter()
        .map(|s| (s, s + needle.len() - 1))
        .collect();
    let answer = if spans.is_empty() {
        UNANSWERABLE.to_string()
    } else {
        answer.to_string()
    };
    SpanTarget {
        knowledge_id,
        spans,
        answer,
    }
}
