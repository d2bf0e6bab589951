//! Answer extraction and per-question aggregation.
//!
//! The reader sees one knowledge at a time. For each of the top-K retrieved
//! knowledge it yields an [`AnswerCandidate`], either decoded from a
//! start/end score matrix or read from a candidate file produced by an
//! external classifier. [`aggregate`] then picks the final answer.

mod span;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::KnowledgeId;
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::retriever::RetrievalResult;
use crate::text::normalize_answer;

pub use span::{
    best_span, decode_span, decode_span_relaxed, locate_span_targets, SpanScores, SpanTarget, DEFAULT_MAX_SPAN_LEN,
};

/// Text of the reserved token the reader predicts for irrelevant knowledge.
pub const UNANSWERABLE: &str = "unanswerable";

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerCandidate {
    pub text: String,
    pub score: f64,
    pub knowledge_id: KnowledgeId,
    /// Decoded token span, when the candidate came from a score matrix.
    pub span: Option<(usize, usize)>,
}

impl AnswerCandidate {
    pub fn new(text: impl Into<String>, score: f64, knowledge_id: KnowledgeId) -> Self {
        Self {
            text: text.into(),
            score,
            knowledge_id,
            span: None,
        }
    }

    pub fn is_unanswerable(&self) -> bool {
        self.text == UNANSWERABLE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// The single candidate with the highest score.
    HighestScore,
    /// The answer given for the most knowledge.
    HighestFrequency,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(Strategy::HighestScore),
            "freq" => Ok(Strategy::HighestFrequency),
            other => Err(Error::Invalid(format!("unknown strategy {other:?}, expected score|freq"))),
        }
    }
}

fn by_score_then_text<'a>(a: &'a AnswerCandidate, b: &'a AnswerCandidate) -> std::cmp::Ordering {
    (b.score + 0.0)
        .total_cmp(&(a.score + 0.0))
        .then_with(|| normalize_answer(&a.text).cmp(&normalize_answer(&b.text)))
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.knowledge_id.cmp(&b.knowledge_id))
}

/// Pick the final answer from per-knowledge candidates, ignoring
/// [`UNANSWERABLE`] ones.
///
/// Highest-Frequency groups candidates by normalized text; a count tie goes
/// to the group with the higher best score, then to the smaller normalized
/// text. The returned text is the group's best-scoring surface form.
pub fn aggregate(candidates: &[AnswerCandidate], strategy: Strategy) -> Result<String> {
    let answerable: Vec<&AnswerCandidate> = candidates.iter().filter(|c| !c.is_unanswerable()).collect();
    if answerable.is_empty() {
        return Err(Error::NoCandidates);
    }
    let winner = match strategy {
        Strategy::HighestScore => answerable.into_iter().min_by(|a, b| by_score_then_text(a, b)),
        Strategy::HighestFrequency => {
            let mut groups: BTreeMap<String, (usize, &AnswerCandidate)> = BTreeMap::new();
            for c in answerable {
                groups
                    .entry(normalize_answer(&c.text))
                    .and_modify(|(n, best)| {
                        *n += 1;
                        if by_score_then_text(c, best).is_lt() {
                            *best = c;
                        }
                    })
                    .or_insert((1, c));
            }
            // BTreeMap iterates in normalized-text order, so the first
            // maximum wins remaining ties.
            groups
                .into_values()
                .reduce(|acc, g| {
                    let better = g.0 > acc.0 || (g.0 == acc.0 && g.1.score > acc.1.score);
                    if better {
                        g
                    } else {
                        acc
                    }
                })
                .map(|(_, best)| best)
        }
    };
    Ok(winner.expect("non-empty").text.clone())
}

/// [`aggregate`] over `primary`; when every primary candidate is
/// unanswerable, fall back to the highest-scoring relaxed candidate.
pub fn aggregate_with_fallback(
    primary: &[AnswerCandidate],
    relaxed: &[AnswerCandidate],
    strategy: Strategy,
) -> Result<String> {
    match aggregate(primary, strategy) {
        Err(Error::NoCandidates) => aggregate(relaxed, Strategy::HighestScore),
        other => other,
    }
}

/// A reader's output for one knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderOutput {
    pub candidate: AnswerCandidate,
    /// Best real answer when `candidate` is unanswerable, if the source can
    /// provide one.
    pub relaxed: Option<AnswerCandidate>,
}

pub trait CandidateSource {
    fn read(&self, qid: &str, knowledge_id: KnowledgeId) -> Result<Option<ReaderOutput>>;
}

#[derive(Deserialize)]
struct ScoreLine {
    qid: String,
    kid: u64,
    #[serde(flatten)]
    scores: SpanScores,
}

/// Start/end score matrices keyed by (question, knowledge).
#[derive(Debug, Clone, Default)]
pub struct ScoreMatrixSource {
    pub max_span_len: usize,
    matrices: HashMap<(String, KnowledgeId), SpanScores>,
}

impl ScoreMatrixSource {
    pub fn new(max_span_len: usize) -> Self {
        Self {
            max_span_len,
            matrices: HashMap::new(),
        }
    }

    pub fn insert(&mut self, qid: &str, kid: KnowledgeId, scores: SpanScores) -> Result<()> {
        scores.validate()?;
        if self.matrices.insert((qid.to_string(), kid), scores).is_some() {
            return Err(Error::Invalid(format!("duplicate score matrix for ({qid}, {kid})")));
        }
        Ok(())
    }

    /// Load `{"qid", "kid", "tokens", "start", "end"}` lines.
    pub fn load(path: &Path, max_span_len: usize) -> Result<Self> {
        let mut out = Self::new(max_span_len);
        let lines: Vec<ScoreLine> = read_jsonl(path)?;
        for (i, line) in lines.into_iter().enumerate() {
            out.insert(&line.qid, KnowledgeId(line.kid), line.scores)
                .map_err(|e| Error::parse(i + 1, e))?;
        }
        Ok(out)
    }
}

impl CandidateSource for ScoreMatrixSource {
    fn read(&self, qid: &str, knowledge_id: KnowledgeId) -> Result<Option<ReaderOutput>> {
        let Some(scores) = self.matrices.get(&(qid.to_string(), knowledge_id)) else {
            return Ok(None);
        };
        let candidate = decode_span(scores, self.max_span_len, knowledge_id)?;
        let relaxed = if candidate.is_unanswerable() {
            decode_span_relaxed(scores, self.max_span_len, knowledge_id)?
        } else {
            None
        };
        Ok(Some(ReaderOutput { candidate, relaxed }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLine {
    pub qid: String,
    pub kid: u64,
    pub answer: String,
    pub score: f64,
}

/// Precomputed candidates, one per (question, knowledge).
#[derive(Debug, Clone, Default)]
pub struct CandidateFileSource {
    candidates: HashMap<(String, KnowledgeId), AnswerCandidate>,
}

impl CandidateFileSource {
    pub fn from_lines(lines: Vec<CandidateLine>) -> Result<Self> {
        let mut candidates = HashMap::with_capacity(lines.len());
        for (i, l) in lines.into_iter().enumerate() {
            if l.answer.trim().is_empty() {
                return Err(Error::parse(i + 1, "empty answer"));
            }
            let kid = KnowledgeId(l.kid);
            let cand = AnswerCandidate::new(l.answer, l.score, kid);
            if candidates.insert((l.qid.clone(), kid), cand).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate candidate for ({}, {kid})", l.qid)));
            }
        }
        Ok(Self { candidates })
    }

    /// Load `{"qid", "kid", "answer", "score"}` lines.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_lines(read_jsonl(path)?)
    }
}

impl CandidateSource for CandidateFileSource {
    fn read(&self, qid: &str, knowledge_id: KnowledgeId) -> Result<Option<ReaderOutput>> {
        Ok(self
            .candidates
            .get(&(qid.to_string(), knowledge_id))
            .map(|c| ReaderOutput {
                candidate: c.clone(),
                relaxed: None,
            }))
    }
}

/// Read the top-`k` hits of one question and aggregate the candidates.
/// Hits the source has no output for are skipped.
pub fn read_pipeline(
    retrieval: &RetrievalResult,
    source: &dyn CandidateSource,
    strategy: Strategy,
    k: usize,
) -> Result<String> {
    let mut primary = Vec::new();
    let mut relaxed = Vec::new();
    for hit in retrieval.top(k) {
        if let Some(out) = source.read(&retrieval.query_id, hit.id)? {
            primary.push(out.candidate);
            relaxed.extend(out.relaxed);
        }
    }
    aggregate_with_fallback(&primary, &relaxed, strategy)
}
