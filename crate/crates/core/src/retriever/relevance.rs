//! Weak-supervision relevance: knowledge is relevant when it contains one of
//! the gold answers.

use crate::text::{contains_token_seq, normalize_answer, normalize_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Normalized answer tokens appear contiguously in the normalized knowledge tokens.
    #[default]
    Token,
    /// Normalized answer string appears anywhere in the normalized knowledge string.
    Substring,
}

/// Answers pre-normalized for repeated containment checks.
#[derive(Debug, Clone)]
pub struct AnswerMatcher {
    answers: Vec<Vec<String>>,
    mode: MatchMode,
}

impl AnswerMatcher {
    pub fn new<S: AsRef<str>>(answers: &[S], mode: MatchMode) -> Self {
        let answers = answers
            .iter()
            .map(|a| normalize_tokens(a.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        Self { answers, mode }
    }

    /// Number of answers contained in `knowledge`.
    pub fn count_contained(&self, knowledge: &str) -> usize {
        match self.mode {
            MatchMode::Token => {
                let tokens = normalize_tokens(knowledge);
                self.answers.iter().filter(|a| contains_token_seq(&tokens, a)).count()
            }
            MatchMode::Substring => {
                let hay = normalize_answer(knowledge);
                self.answers.iter().filter(|a| hay.contains(&a.join(" "))).count()
            }
        }
    }

    pub fn is_relevant(&self, knowledge: &str) -> bool {
        self.count_contained(knowledge) > 0
    }
}

pub fn label_relevance<S: AsRef<str>>(answers: &[S], knowledge: &str) -> bool {
    label_relevance_with(answers, knowledge, MatchMode::Token)
}

pub fn label_relevance_with<S: AsRef<str>>(answers: &[S], knowledge: &str, mode: MatchMode) -> bool {
    AnswerMatcher::new(answers, mode).is_relevant(knowledge)
}
