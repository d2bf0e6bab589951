//! Open-domain answer evaluation through textual entailment.
//!
//! A question is grounded into a statement with an answer slot. For each gold
//! answer a_j the slot is filled with a_j (premise) and with the prediction
//! (hypothesis); the mean entailment over the statements assembled under a_j
//! is S_j. The prediction earns `S_j* × gold(a_j*)` for the best j*, and only
//! when S_j* clears the 0.5 threshold.

mod entail;
mod grounding;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::ser_round6;
use crate::metrics::{vqa_score, Prediction, QaInstance};
use crate::text::normalize_answer;

pub use entail::{EntailmentProvider, ExactMatchEntailment};
pub use grounding::{ground_question, GroundedStatement, Grounding, GroundingRule, SkipReason, SLOT};

/// Mean entailment must exceed this to earn credit.
pub const ENTAILMENT_THRESHOLD: f64 = 0.5;

/// Map every gold answer to every statement grounded from its question.
pub fn assemble<'a, S: AsRef<str>>(
    statements: &'a [GroundedStatement],
    gold_answers: &[S],
) -> BTreeMap<String, Vec<&'a GroundedStatement>> {
    gold_answers
        .iter()
        .map(|a| (a.as_ref().to_string(), statements.iter().collect()))
        .collect()
}

/// S_j: mean over `statements` of E(premise = g[gold], hypothesis = g[prediction]),
/// each provider score clamped into [0, 1].
pub fn mean_entailment(
    gold: &str,
    prediction: &str,
    statements: &[&GroundedStatement],
    provider: &mut dyn EntailmentProvider,
) -> Result<f64> {
    if statements.is_empty() {
        return Err(Error::Invalid(format!("no grounded statements for answer {gold:?}")));
    }
    let mut total = 0.0;
    for g in statements {
        let score = provider
            .entail(&g.fill(gold), &g.fill(prediction))
            .map_err(|e| Error::Entailment {
                statement: g.template.clone(),
                source: Box::new(e),
            })?;
        if score.is_nan() {
            return Err(Error::Entailment {
                statement: g.template.clone(),
                source: Box::new(Error::Provider("score is NaN".into())),
            });
        }
        total += score.clamp(0.0, 1.0);
    }
    Ok(total / statements.len() as f64)
}

/// Gold answer is a number or a spelled number up to twenty.
pub fn is_numeric_answer(answer: &str) -> bool {
    const WORDS: &[&str] = &[
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
        "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
    ];
    let norm = normalize_answer(answer);
    norm.replace(',', "").parse::<f64>().is_ok() || WORDS.contains(&norm.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldEntailment {
    pub answer: String,
    #[serde(serialize_with = "ser_round6")]
    pub gold_score: f64,
    /// S_j; absent when the exact-match bypass applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_entailment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenEvalRecord {
    pub qid: String,
    pub prediction: String,
    pub per_gold: Vec<GoldEntailment>,
    pub chosen: Option<String>,
    #[serde(serialize_with = "ser_round6")]
    pub score: f64,
    #[serde(serialize_with = "ser_round6")]
    pub original_score: f64,
    /// The prediction equals a gold answer after normalization and took its
    /// gold score without entailment.
    pub exact_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenSkip {
    Ungrounded,
    ChoiceQuestion,
    NumericAnswer,
}

impl OpenSkip {
    pub fn as_str(self) -> &'static str {
        match self {
            OpenSkip::Ungrounded => "ungrounded",
            OpenSkip::ChoiceQuestion => "choice_question",
            OpenSkip::NumericAnswer => "numeric_answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpenOutcome {
    Scored(OpenEvalRecord),
    Skipped(OpenSkip),
}

/// Distinct gold answers by normalized text, with their soft scores.
fn gold_scores(instance: &QaInstance) -> Vec<(String, f64)> {
    let mut seen = Vec::<String>::new();
    let mut out = Vec::new();
    for a in &instance.answers {
        let norm = normalize_answer(&a.text);
        if seen.contains(&norm) {
            continue;
        }
        seen.push(norm);
        out.push((a.text.clone(), vqa_score(&a.text, instance)));
    }
    out
}

/// Open-domain score of one prediction against the gold answers of
/// `instance`, using the question's grounded `statements`.
pub fn open_score(
    instance: &QaInstance,
    statements: &[GroundedStatement],
    prediction: &str,
    provider: &mut dyn EntailmentProvider,
) -> Result<OpenOutcome> {
    if statements.is_empty() {
        return Ok(OpenOutcome::Skipped(OpenSkip::Ungrounded));
    }
    if statements.iter().any(|s| s.rule == GroundingRule::Choice) {
        return Ok(OpenOutcome::Skipped(OpenSkip::ChoiceQuestion));
    }
    if instance.answers.iter().any(|a| is_numeric_answer(&a.text)) {
        return Ok(OpenOutcome::Skipped(OpenSkip::NumericAnswer));
    }

    let golds = gold_scores(instance);
    let original_score = vqa_score(prediction, instance);
    let pred_norm = normalize_answer(prediction);
    let mut record = OpenEvalRecord {
        qid: instance.qid.clone(),
        prediction: prediction.to_string(),
        per_gold: golds
            .iter()
            .map(|(answer, gold_score)| GoldEntailment {
                answer: answer.clone(),
                gold_score: *gold_score,
                mean_entailment: None,
            })
            .collect(),
        chosen: None,
        score: 0.0,
        original_score,
        exact_match: false,
    };
    if pred_norm.is_empty() {
        return Ok(OpenOutcome::Scored(record));
    }

    if let Some((answer, _)) = golds.iter().find(|(a, _)| normalize_answer(a) == pred_norm) {
        record.chosen = Some(answer.clone());
        record.score = original_score;
        record.exact_match = true;
        return Ok(OpenOutcome::Scored(record));
    }

    let gold_texts: Vec<&str> = golds.iter().map(|(a, _)| a.as_str()).collect();
    let assembled = assemble(statements, &gold_texts);
    let mut best: Option<(usize, f64)> = None;
    for (j, (answer, gold_score)) in golds.iter().enumerate() {
        let s_j = mean_entailment(answer, prediction, &assembled[answer.as_str()], provider)?;
        record.per_gold[j].mean_entailment = Some(s_j);
        let better = match best {
            None => true,
            Some((b, s_b)) => s_j > s_b || (s_j == s_b && *gold_score > golds[b].1),
        };
        if better {
            best = Some((j, s_j));
        }
    }
    let (j, s_j) = best.expect("instance has gold answers");
    record.chosen = Some(golds[j].0.clone());
    record.score = if s_j > ENTAILMENT_THRESHOLD { s_j * golds[j].1 } else { 0.0 };
    Ok(OpenOutcome::Scored(record))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenEvalReport {
    pub questions: usize,
    pub grounded: usize,
    /// Share of questions the grounding rules handled.
    #[serde(serialize_with = "ser_round6")]
    pub grounding_coverage: f64,
    pub skipped: BTreeMap<&'static str, usize>,
    pub evaluated: usize,
    #[serde(serialize_with = "ser_round6")]
    pub open_accuracy: f64,
    /// Soft VQA accuracy over the same evaluated questions.
    #[serde(serialize_with = "ser_round6")]
    pub original_accuracy: f64,
    pub exact_match_bypass: bool,
    pub records: Vec<OpenEvalRecord>,
}

/// Ground, assemble and score every instance. Skipped questions leave the
/// denominator and are counted by reason; a missing prediction scores 0.
pub fn evaluate_open(
    predictions: &[Prediction],
    instances: &[QaInstance],
    provider: &mut dyn EntailmentProvider,
) -> Result<OpenEvalReport> {
    let by_qid: std::collections::HashMap<&str, &str> =
        predictions.iter().map(|p| (p.qid.as_str(), p.answer.as_str())).collect();
    let mut skipped: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut records = Vec::new();
    let mut grounded = 0;
    for inst in instances {
        let statements: Vec<GroundedStatement> = match ground_question(&inst.qid, &inst.question) {
            Grounding::Grounded(g) => {
                grounded += 1;
                vec![g]
            }
            Grounding::Skipped(reason) => {
                *skipped.entry(reason.as_str()).or_default() += 1;
                continue;
            }
        };
        let prediction = by_qid.get(inst.qid.as_str()).copied().unwrap_or("");
        match open_score(inst, &statements, prediction, provider)? {
            OpenOutcome::Scored(r) => records.push(r),
            OpenOutcome::Skipped(reason) => *skipped.entry(reason.as_str()).or_default() += 1,
        }
    }
    let evaluated = records.len();
    let mean = |f: fn(&OpenEvalRecord) -> f64| {
        if evaluated == 0 {
            0.0
        } else {
            records.iter().map(f).sum::<f64>() / evaluated as f64
        }
    };
    Ok(OpenEvalReport {
        questions: instances.len(),
        grounded,
        grounding_coverage: if instances.is_empty() {
            0.0
        } else {
            grounded as f64 / instances.len() as f64
        },
        skipped,
        evaluated,
        open_accuracy: mean(|r| r.score),
        original_accuracy: mean(|r| r.original_score),
        exact_match_bypass: true,
        records,
    })
}
