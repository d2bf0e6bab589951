//! Length bounds and the language filter applied to each knowledge snippet.

use std::ops::Range;

use crate::text::{collapse_whitespace, word_count};

pub const MIN_WORDS: usize = 10;
pub const MAX_WORDS: usize = 300;

/// Detects non-English parts of a text. Implementations return byte ranges
/// into `text`; overlapping or unsorted ranges are allowed.
pub trait LanguageFilter: Send + Sync {
    fn non_english_spans(&self, text: &str) -> Vec<Range<usize>>;
}

/// Flags every `window`-character window in which the share of non-ASCII
/// letters exceeds `threshold`. Flagged windows are merged, trimmed to the
/// outermost non-ASCII letters they contain, then widened to whole words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRatioFilter {
    pub window: usize,
    pub threshold: f64,
}

impl Default for WindowRatioFilter {
    fn default() -> Self {
        Self {
            window: 20,
            threshold: 0.5,
        }
    }
}

fn is_foreign_letter(c: char) -> bool {
    c.is_alphabetic() && !c.is_ascii()
}

impl LanguageFilter for WindowRatioFilter {
    fn non_english_spans(&self, text: &str) -> Vec<Range<usize>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let n = chars.len();
        if n == 0 {
            return Vec::new();
        }
        let w = self.window.clamp(1, n);

        let mut prefix = vec![0usize; n + 1];
        for (i, &(_, c)) in chars.iter().enumerate() {
            prefix[i + 1] = prefix[i] + usize::from(is_foreign_letter(c));
        }

        let mut covered = vec![false; n];
        for start in 0..=n - w {
            let foreign = prefix[start + w] - prefix[start];
            if foreign as f64 / w as f64 > self.threshold {
                covered[start..start + w].iter_mut().for_each(|c| *c = true);
            }
        }

        let mut spans: Vec<Range<usize>> = Vec::new();
        let mut i = 0;
        while i < n {
            if !covered[i] {
                i += 1;
                continue;
            }
            let run_start = i;
            while i < n && covered[i] {
                i += 1;
            }
            let run = run_start..i;
            let Some(first) = run.clone().find(|&k| is_foreign_letter(chars[k].1)) else {
                continue;
            };
            let last = run.clone().rev().find(|&k| is_foreign_letter(chars[k].1)).unwrap();
            let mut lo = first;
            while lo > 0 && !chars[lo - 1].1.is_whitespace() {
                lo -= 1;
            }
            let mut hi = last + 1;
            while hi < n && !chars[hi].1.is_whitespace() {
                hi += 1;
            }
            let byte_lo = chars[lo].0;
            let byte_hi = if hi == n { text.len() } else { chars[hi].0 };
            match spans.last_mut() {
                Some(prev) if prev.end >= byte_lo => prev.end = prev.end.max(byte_hi),
                _ => spans.push(byte_lo..byte_hi),
            }
        }
        spans
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    TooShort,
    TooLong,
    NonEnglish,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::TooLong => "too_long",
            RejectReason::NonEnglish => "non_english",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Keep(String),
    Reject(RejectReason),
}

fn remove_spans(text: &str, mut spans: Vec<Range<usize>>) -> String {
    spans.sort_by_key(|r| r.start);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        if span.start > cursor {
            out.push_str(&text[cursor..span.start]);
        }
        out.push(' ');
        cursor = cursor.max(span.end);
    }
    out.push_str(&text[cursor.min(text.len())..]);
    collapse_whitespace(&out)
}

/// Decide whether a snippet enters the corpus. Non-English spans are removed
/// first (until the filter finds nothing more), then the word-count bounds are
/// applied to what remains. Both bounds are inclusive keeps.
pub fn filter_knowledge(text: &str, language: &dyn LanguageFilter) -> Verdict {
    let mut current = text.trim().to_string();
    // Removal can join text across a cut; a handful of passes reaches a fixpoint.
    for _ in 0..8 {
        let spans = language.non_english_spans(&current);
        let spans: Vec<_> = spans.into_iter().filter(|r| !r.is_empty()).collect();
        if spans.is_empty() {
            break;
        }
        current = remove_spans(&current, spans);
        if current.is_empty() {
            return Verdict::Reject(RejectReason::NonEnglish);
        }
    }
    let count = word_count(&current);
    if count < MIN_WORDS {
        Verdict::Reject(RejectReason::TooShort)
    } else if count > MAX_WORDS {
        Verdict::Reject(RejectReason::TooLong)
    } else {
        Verdict::Keep(current)
    }
}
