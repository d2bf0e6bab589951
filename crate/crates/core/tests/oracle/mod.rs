//! Naive reference implementations used as test oracles. Each one is written
//! straight from the formula, without indexes or pruning.

#![allow(dead_code)]

use std::collections::BTreeSet;

/// BM25 of every document against `query`, evaluated document by document.
pub fn bm25_scores(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let total: usize = docs.iter().map(Vec::len).sum();
    let avg = total as f64 / n;
    let terms: BTreeSet<&String> = query.iter().collect();
    let df: Vec<f64> = terms
        .iter()
        .map(|term| docs.iter().filter(|d| d.contains(term)).count() as f64)
        .collect();
    docs.iter()
        .map(|doc| {
            let mut score = 0.0;
            for (term, &df) in terms.iter().zip(&df) {
                let tf = doc.iter().filter(|t| t == term).count();
                if tf == 0 {
                    continue;
                }
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let tf = tf as f64;
                let len = doc.len() as f64;
                score += idf * (tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg)));
            }
            score
        })
        .collect()
}

/// All `(id, score)` pairs sorted by score descending, id ascending.
pub fn full_sort(mut scored: Vec<(u64, f64)>) -> Vec<(u64, f64)> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// −(1/B) Σ_i log( exp(q_i·c_i) / Σ_j exp(q_i·c_j) ), with plain loops.
pub fn nll_loss(q: &[Vec<f64>], c: &[Vec<f64>]) -> f64 {
    let b = q.len();
    let mut total = 0.0;
    for i in 0..b {
        let s: Vec<f64> = (0..b)
            .map(|j| q[i].iter().zip(&c[j]).map(|(x, y)| x * y).sum())
            .collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + s.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - s[i];
    }
    total / b as f64
}

/// Central finite-difference gradient of `nll_loss` with respect to every
/// entry of `q` (wrt = 0) or `c` (wrt = 1).
pub fn nll_numeric_grad(q: &[Vec<f64>], c: &[Vec<f64>], wrt: usize, h: f64) -> Vec<Vec<f64>> {
    let target = if wrt == 0 { q } else { c };
    let mut grad = vec![vec![0.0; target[0].len()]; target.len()];
    for i in 0..target.len() {
        for k in 0..target[0].len() {
            let mut plus = (q.to_vec(), c.to_vec());
            let mut minus = (q.to_vec(), c.to_vec());
            if wrt == 0 {
                plus.0[i][k] += h;
                minus.0[i][k] -= h;
            } else {
                plus.1[i][k] += h;
                minus.1[i][k] -= h;
            }
            grad[i][k] = (nll_loss(&plus.0, &plus.1) - nll_loss(&minus.0, &minus.1)) / (2.0 * h);
        }
    }
    grad
}

/// Exhaustive span search. `None` means the sentinel wins: either no valid
/// span exists or start[0]+end[0] is strictly larger than every span sum.
/// Among equal sums the lexicographically smallest (s, e) wins.
pub fn brute_span(start: &[f64], end: &[f64], max_len: usize) -> Option<(usize, usize)> {
    let n = start.len();
    let mut all = Vec::new();
    for s in 1..n {
        for e in 1..n {
            if s <= e && e - s + 1 <= max_len {
                all.push((start[s] + end[e], s, e));
            }
        }
    }
    let best = all.iter().cloned().fold(None::<(f64, usize, usize)>, |acc, x| match acc {
        None => Some(x),
        Some(a) if x.0 > a.0 || (x.0 == a.0 && (x.1, x.2) < (a.1, a.2)) => Some(x),
        keep => keep,
    })?;
    if start[0] + end[0] > best.0 {
        None
    } else {
        Some((best.1, best.2))
    }
}

/// Lowercase and strip leading/trailing non-alphanumerics from each
/// whitespace word, dropping words that become empty.
pub fn norm_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Does the word sequence `needle` occur contiguously in `hay`?
pub fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Any of the bad-word terms, as whole word sequences.
pub fn has_bad_word(text: &str, terms: &[&str]) -> bool {
    let hay = norm_words(text);
    terms.iter().any(|t| contains_seq(&hay, &norm_words(t)))
}
