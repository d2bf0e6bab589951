//! Retrieval Precision*/Recall* and the soft VQA answer score.
//!
//! Both retrieval metrics count a retrieved knowledge as a hit when it
//! contains any gold answer under the same rule the retriever trains with
//! ([`AnswerMatcher`]).

mod instance;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, ser_round6};
use crate::retriever::{AnswerMatcher, MatchMode, RetrievalResult};
use crate::text::normalize_answer;

pub use instance::{load_instances, GoldAnswer, QaInstance, ANSWERS_PER_QUESTION};

/// Share of the retrieved texts that contain at least one answer.
/// A text containing several answers still counts once.
pub fn precision_star<S: AsRef<str>, T: AsRef<str>>(answers: &[S], retrieved: &[T]) -> f64 {
    precision_with(&AnswerMatcher::new(answers, MatchMode::Token), retrieved)
}

/// 1 when any retrieved text contains any answer, else 0.
pub fn recall_star<S: AsRef<str>, T: AsRef<str>>(answers: &[S], retrieved: &[T]) -> f64 {
    recall_with(&AnswerMatcher::new(answers, MatchMode::Token), retrieved)
}

fn precision_with<T: AsRef<str>>(matcher: &AnswerMatcher, retrieved: &[T]) -> f64 {
    if retrieved.is_empty() {
        return 0.0;
    }
    let hits: usize = retrieved
        .iter()
        .map(|kn| matcher.count_contained(kn.as_ref()).min(1))
        .sum();
    hits as f64 / retrieved.len() as f64
}

fn recall_with<T: AsRef<str>>(matcher: &AnswerMatcher, retrieved: &[T]) -> f64 {
    let total: usize = retrieved.iter().map(|kn| matcher.count_contained(kn.as_ref())).sum();
    total.min(1) as f64
}

/// min(#annotators who gave this answer / 3, 1), matched after answer
/// normalization. Counts follow the ten-answer convention.
pub fn vqa_score(prediction: &str, instance: &QaInstance) -> f64 {
    let pred = normalize_answer(prediction);
    if pred.is_empty() {
        return 0.0;
    }
    let count: u32 = instance
        .answers
        .iter()
        .filter(|a| normalize_answer(&a.text) == pred)
        .map(|a| a.count)
        .sum();
    (f64::from(count) / 3.0).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionRetrieval {
    pub qid: String,
    pub retrieved: usize,
    #[serde(serialize_with = "ser_round6")]
    pub precision: f64,
    #[serde(serialize_with = "ser_round6")]
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalEvalReport {
    pub k: usize,
    #[serde(serialize_with = "ser_round6")]
    pub mean_precision: f64,
    #[serde(serialize_with = "ser_round6")]
    pub mean_recall: f64,
    pub questions: usize,
    /// Instances that had no line in the hits file; scored 0.
    pub missing_hits: usize,
    pub per_question: Vec<QuestionRetrieval>,
}

/// P*/R* at `k` for every instance, in instance order.
pub fn evaluate_retrieval(
    results: &[RetrievalResult],
    corpus: &Corpus,
    instances: &[QaInstance],
    k: usize,
    mode: MatchMode,
) -> Result<RetrievalEvalReport> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let by_qid: HashMap<&str, &RetrievalResult> = results.iter().map(|r| (r.query_id.as_str(), r)).collect();
    let mut per_question = Vec::with_capacity(instances.len());
    let mut missing_hits = 0;
    for inst in instances {
        let texts: Vec<&str> = match by_qid.get(inst.qid.as_str()) {
            Some(r) => r
                .top(k)
                .iter()
                .map(|h| {
                    corpus
                        .text(h.id)
                        .ok_or_else(|| Error::Invalid(format!("{}: knowledge id {} not in corpus", inst.qid, h.id)))
                })
                .collect::<Result<_>>()?,
            None => {
                missing_hits += 1;
                Vec::new()
            }
        };
        let matcher = AnswerMatcher::new(&inst.answer_texts(), mode);
        per_question.push(QuestionRetrieval {
            qid: inst.qid.clone(),
            retrieved: texts.len(),
            precision: precision_with(&matcher, &texts),
            recall: recall_with(&matcher, &texts),
        });
    }
    let n = per_question.len().max(1) as f64;
    Ok(RetrievalEvalReport {
        k,
        mean_precision: per_question.iter().map(|q| q.precision).sum::<f64>() / n,
        mean_recall: per_question.iter().map(|q| q.recall).sum::<f64>() / n,
        questions: per_question.len(),
        missing_hits,
        per_question,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub qid: String,
    pub answer: String,
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VqaReport {
    #[serde(serialize_with = "ser_round6")]
    pub accuracy: f64,
    pub questions: usize,
    /// Instances without a prediction; scored 0.
    pub unanswered: usize,
}

/// Mean [`vqa_score`] over all instances.
pub fn evaluate_run(predictions: &[Prediction], instances: &[QaInstance]) -> Result<VqaReport> {
    let mut by_qid = HashMap::new();
    for p in predictions {
        if by_qid.insert(p.qid.as_str(), p.answer.as_str()).is_some() {
            return Err(Error::Invalid(format!("duplicate prediction for {}", p.qid)));
        }
    }
    let mut total = 0.0;
    let mut unanswered = 0;
    for inst in instances {
        match by_qid.get(inst.qid.as_str()) {
            Some(answer) => total += vqa_score(answer, inst),
            None => unanswered += 1,
        }
    }
    Ok(VqaReport {
        accuracy: if instances.is_empty() {
            0.0
        } else {
            total / instances.len() as f64
        },
        questions: instances.len(),
        unanswered,
    })
}
