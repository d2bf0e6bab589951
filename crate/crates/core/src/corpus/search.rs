//! Ingestion of pre-fetched search-result files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Items kept per query: the engine returns the top ten pages.
pub const MAX_ITEMS_PER_QUERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchItem {
    pub title: String,
    pub link: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSearchResult {
    pub query_question: String,
    pub query_answer: String,
    pub items: Vec<SearchItem>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct SearchParse {
    pub results: Vec<RawSearchResult>,
    /// Items dropped for a missing or blank snippet.
    pub skipped_items: usize,
    /// Items dropped beyond [`MAX_ITEMS_PER_QUERY`].
    pub truncated_items: usize,
}

#[derive(Deserialize)]
struct RecordLine {
    question: String,
    answer: String,
    #[serde(default)]
    items: Vec<ItemLine>,
}

#[derive(Deserialize)]
struct ItemLine {
    #[serde(default)]
    title: String,
    #[serde(default)]
    link: String,
    snippet: Option<String>,
}

/// Parse the search-result JSON Lines format:
/// `{"question", "answer", "items": [{"title", "link", "snippet"}]}`.
pub fn parse_search_results(bytes: &[u8]) -> Result<SearchParse> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "invalid UTF-8")
    })?;

    let mut out = SearchParse::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordLine = serde_json::from_str(line).map_err(|e| Error::parse(idx + 1, e))?;
        let mut items = Vec::with_capacity(record.items.len().min(MAX_ITEMS_PER_QUERY));
        for item in record.items {
            let snippet = match item.snippet {
                Some(s) if !s.trim().is_empty() => s,
                _ => {
                    out.skipped_items += 1;
                    continue;
                }
            };
            if items.len() == MAX_ITEMS_PER_QUERY {
                out.truncated_items += 1;
                continue;
            }
            items.push(SearchItem {
                title: item.title,
                link: item.link,
                snippet,
            });
        }
        out.results.push(RawSearchResult {
            query_question: record.question,
            query_answer: record.answer,
            items,
        });
    }
    if out.skipped_items > 0 {
        log::warn!("skipped {} search items without a snippet", out.skipped_items);
    }
    Ok(out)
}
