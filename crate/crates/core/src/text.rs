//! Tokenization and normalization shared by every module.
//!
//! Three definitions live here and nowhere else:
//!
//! * [`words`]: Unicode-whitespace split with punctuation left attached. Used
//!   for the corpus word-count bounds.
//! * [`tokenize`]: lowercase, split on whitespace and punctuation. Used by
//!   BM25 for both documents and queries.
//! * [`normalize_tokens`] / [`normalize_answer`]: lowercase with punctuation
//!   stripped at token edges. Used for answer containment, span targets,
//!   aggregation and answer scoring.

/// Whitespace-delimited words, punctuation attached.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}

/// Collapse runs of Unicode whitespace into one ASCII space and trim.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for w in words(text) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// Retrieval tokenizer: lowercase, split on anything that is not
/// alphanumeric, drop empty tokens. No stemming, no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercase one whitespace token and strip punctuation from both edges.
pub fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Answer/knowledge normalization: whitespace split, then [`normalize_token`]
/// on each piece, dropping tokens that were pure punctuation.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    words(text)
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Canonical string form of an answer.
pub fn normalize_answer(text: &str) -> String {
    normalize_tokens(text).join(" ")
}

/// Start positions of every contiguous occurrence of `needle` in `haystack`.
/// An empty needle never matches.
pub fn find_token_seq<S: AsRef<str>, T: AsRef<str>>(haystack: &[S], needle: &[T]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&start| {
            needle
                .iter()
                .zip(&haystack[start..])
                .all(|(n, h)| n.as_ref() == h.as_ref())
        })
        .collect()
}

pub fn contains_token_seq<S: AsRef<str>, T: AsRef<str>>(haystack: &[S], needle: &[T]) -> bool {
    !find_token_seq(haystack, needle).is_empty()
}
