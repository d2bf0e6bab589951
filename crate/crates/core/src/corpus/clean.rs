//! Post-build corpus cleaning: bad-word list, boilerplate markers and code.

use std::collections::HashMap;
use std::path::Path;

use super::Corpus;
use crate::error::{Error, Result};
use crate::text::normalize_tokens;

/// A bad-word list indexed by first token. Terms may span several tokens.
#[derive(Debug, Clone, Default)]
pub struct BadWords {
    by_first: HashMap<String, Vec<Vec<String>>>,
    len: usize,
}

impl BadWords {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = BadWords::default();
        for term in terms {
            let tokens = normalize_tokens(term.as_ref());
            let Some((first, rest)) = tokens.split_first() else {
                continue;
            };
            let bucket = out.by_first.entry(first.clone()).or_default();
            if !bucket.iter().any(|r| r == rest) {
                bucket.push(rest.to_vec());
                out.len += 1;
            }
        }
        out
    }

    /// Load a UTF-8 list, one term per line.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingBadWords(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_terms(text.lines()))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// First listed term found at token boundaries, case-insensitively.
    pub fn find_in(&self, text: &str) -> Option<String> {
        let tokens = normalize_tokens(text);
        for (i, tok) in tokens.iter().enumerate() {
            if let Some(rests) = self.by_first.get(tok) {
                for rest in rests {
                    if tokens.len() - i > rest.len() && tokens[i + 1..i + 1 + rest.len()] == rest[..] {
                        let mut term = tok.clone();
                        for r in rest {
                            term.push(' ');
                            term.push_str(r);
                        }
                        return Some(term);
                    }
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanRule {
    BadWord(String),
    JavaScript,
    LoremIpsum,
    CurlyBracket,
}

/// The first rule that removes `text`, if any.
pub fn match_clean_rule(text: &str, bad_words: &BadWords) -> Option<CleanRule> {
    if text.contains('{') {
        return Some(CleanRule::CurlyBracket);
    }
    let lower = text.to_lowercase();
    if lower.contains("javascript") {
        return Some(CleanRule::JavaScript);
    }
    if lower.contains("lorem ipsum") {
        return Some(CleanRule::LoremIpsum);
    }
    bad_words.find_in(text).map(CleanRule::BadWord)
}

/// Drop every entry matched by a cleaning rule. Surviving entries keep their
/// ids so that embeddings and retrieval output stay aligned.
pub fn clean_corpus(corpus: Corpus, bad_words: &BadWords) -> (Corpus, usize) {
    let before = corpus.len();
    let kept: Vec<_> = corpus
        .into_entries()
        .into_iter()
        .filter(|e| match_clean_rule(&e.text, bad_words).is_none())
        .collect();
    let removed = before - kept.len();
    (Corpus { entries: kept }, removed)
}
