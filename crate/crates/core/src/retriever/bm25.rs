//! Okapi BM25 over an inverted index.
//!
//! score(q, d) = Σ_t idf(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln((N − df + 0.5) / (df + 0.5) + 1)
//!
//! The sum runs over the distinct query tokens. Every document is scored, so
//! documents sharing no term with the query still fill the ranking at 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{top_k, Hit, RetrievalResult};
use crate::corpus::{Corpus, KnowledgeId};
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_ids: Vec<KnowledgeId>,
    doc_lens: Vec<u32>,
    avg_len: f64,
    terms: HashMap<String, usize>,
    postings: Vec<Vec<Posting>>,
}

/// On-disk layout: terms sorted so the file is byte-stable.
#[derive(Serialize, Deserialize)]
struct IndexFile {
    k1: f64,
    b: f64,
    doc_ids: Vec<KnowledgeId>,
    doc_lens: Vec<u32>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus, params: Bm25Params) -> Self {
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lens = Vec::with_capacity(corpus.len());
        let mut terms: HashMap<String, usize> = HashMap::new();
        let mut postings: Vec<Vec<Posting>> = Vec::new();

        for (doc, entry) in corpus.entries().iter().enumerate() {
            let tokens = tokenize(&entry.text);
            doc_ids.push(entry.id);
            doc_lens.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for (term, tf) in counts {
                let next = postings.len();
                let slot = *terms.entry(term).or_insert(next);
                if slot == next {
                    postings.push(Vec::new());
                }
                postings[slot].push(Posting { doc: doc as u32, tf });
            }
        }
        Self::assemble(params, doc_ids, doc_lens, terms, postings)
    }

    fn assemble(
        params: Bm25Params,
        doc_ids: Vec<KnowledgeId>,
        doc_lens: Vec<u32>,
        terms: HashMap<String, usize>,
        postings: Vec<Vec<Posting>>,
    ) -> Self {
        let total: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        let avg_len = if doc_lens.is_empty() {
            0.0
        } else {
            total as f64 / doc_lens.len() as f64
        };
        Self {
            params,
            doc_ids,
            doc_lens,
            avg_len,
            terms,
            postings,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn vocabulary_len(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, |&t| self.postings[t].len())
    }

    /// Term frequency of `term` in the document with knowledge id `id`.
    pub fn term_freq(&self, id: KnowledgeId, term: &str) -> usize {
        let (Some(&t), Ok(doc)) = (self.terms.get(term), self.doc_ids.binary_search(&id)) else {
            return 0;
        };
        self.postings[t]
            .binary_search_by_key(&(doc as u32), |p| p.doc)
            .map_or(0, |i| self.postings[t][i].tf as usize)
    }

    pub fn doc_len(&self, id: KnowledgeId) -> Option<usize> {
        self.doc_ids.binary_search(&id).ok().map(|d| self.doc_lens[d] as usize)
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.num_docs() as f64;
        let df = df as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Scores for every document, in corpus order.
    pub fn score_all(&self, query_text: &str) -> Vec<f64> {
        let mut scores = vec![0.0f64; self.num_docs()];
        let Bm25Params { k1, b } = self.params;
        let query: BTreeSet<String> = tokenize(query_text).into_iter().collect();
        for term in &query {
            let Some(&t) = self.terms.get(term) else {
                continue;
            };
            let postings = &self.postings[t];
            let idf = self.idf(postings.len());
            for p in postings {
                let tf = f64::from(p.tf);
                let len = f64::from(self.doc_lens[p.doc as usize]);
                let norm = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / self.avg_len));
                scores[p.doc as usize] += idf * norm;
            }
        }
        scores
    }

    /// Top-`k` documents; shorter when the corpus has fewer than `k`.
    pub fn search(&self, query_id: &str, query_text: &str, k: usize) -> RetrievalResult {
        let hits = self
            .score_all(query_text)
            .into_iter()
            .zip(&self.doc_ids)
            .map(|(score, &id)| Hit { id, score })
            .collect();
        RetrievalResult {
            query_id: query_id.to_string(),
            hits: top_k(hits, k),
        }
    }

    /// Search a batch of `(query id, query text)` pairs in parallel.
    pub fn search_many(&self, queries: &[(String, String)], k: usize) -> Vec<RetrievalResult> {
        queries.par_iter().map(|(qid, text)| self.search(qid, text, k)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut postings = BTreeMap::new();
        for (term, &t) in &self.terms {
            postings.insert(term.clone(), self.postings[t].iter().map(|p| (p.doc, p.tf)).collect());
        }
        let file = IndexFile {
            k1: self.params.k1,
            b: self.params.b,
            doc_ids: self.doc_ids.clone(),
            doc_lens: self.doc_lens.clone(),
            postings,
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Invalid(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: IndexFile = serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e))?;
        if file.doc_ids.len() != file.doc_lens.len() {
            return Err(Error::Invalid("BM25 index: doc_ids and doc_lens differ in length".into()));
        }
        let n = file.doc_ids.len() as u32;
        let mut terms = HashMap::with_capacity(file.postings.len());
        let mut postings = Vec::with_capacity(file.postings.len());
        for (term, list) in file.postings {
            if list.iter().any(|&(doc, _)| doc >= n) {
                return Err(Error::Invalid(format!("BM25 index: posting for {term:?} out of range")));
            }
            terms.insert(term, postings.len());
            postings.push(list.into_iter().map(|(doc, tf)| Posting { doc, tf }).collect());
        }
        Ok(Self::assemble(
            Bm25Params { k1: file.k1, b: file.b },
            file.doc_ids,
            file.doc_lens,
            terms,
            postings,
        ))
    }
}
