use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;

/// Annotations per question after each of the five human answers is counted twice.
pub const ANSWERS_PER_QUESTION: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaInstance {
    pub qid: String,
    pub question: String,
    #[serde(default)]
    pub image: String,
    #[serde(default)]
    pub caption: String,
    pub answers: Vec<GoldAnswer>,
    /// Counts are raw annotations (five per question) and still need doubling.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub raw: bool,
}

impl QaInstance {
    pub fn answer_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }

    /// Double raw counts and check the ten-answer convention.
    pub fn normalized(mut self) -> Result<Self> {
        if self.raw {
            self.answers.iter_mut().for_each(|a| a.count *= 2);
            self.raw = false;
        }
        if self.answers.iter().any(|a| a.text.trim().is_empty()) {
            return Err(Error::Invalid(format!("{}: empty answer text", self.qid)));
        }
        let total: u32 = self.answers.iter().map(|a| a.count).sum();
        if total != ANSWERS_PER_QUESTION {
            return Err(Error::Invalid(format!(
                "{}: answer counts sum to {total}, expected {ANSWERS_PER_QUESTION}",
                self.qid
            )));
        }
        Ok(self)
    }
}

/// Load `{"qid", "question", "image", "caption", "answers": [{"text", "count"}]}`
/// lines. Lines flagged `"raw": true` carry five annotations and are doubled.
pub fn load_instances(path: &Path) -> Result<Vec<QaInstance>> {
    let rows: Vec<QaInstance> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.normalized().map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}
