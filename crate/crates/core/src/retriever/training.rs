//! Weakly supervised training pairs and the in-batch negative objective.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AnswerMatcher, MatchMode, Query};
use crate::corpus::{Corpus, KnowledgeId};
use crate::error::{Error, Result};
use crate::metrics::QaInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub query: Query,
    pub positive: KnowledgeId,
    /// Positives of the other pairs in the same batch.
    pub negatives: Vec<KnowledgeId>,
}

#[derive(Debug, Clone, Default)]
pub struct PairBuild {
    pub pairs: Vec<TrainingPair>,
    /// Instances with no relevant knowledge at all.
    pub dropped_instances: usize,
}

/// One pair per (instance, relevant knowledge). Negatives are filled in
/// later by [`in_batch_batches`].
pub fn build_training_pairs(instances: &[QaInstance], corpus: &Corpus, mode: MatchMode) -> PairBuild {
    let per_instance: Vec<Vec<TrainingPair>> = instances
        .par_iter()
        .map(|inst| {
            let answers = inst.answer_texts();
            let matcher = AnswerMatcher::new(&answers, mode);
            let query = Query {
                question: inst.question.clone(),
                caption: inst.caption.clone(),
                answers: answers.iter().map(|a| a.to_string()).collect(),
            };
            corpus
                .entries()
                .iter()
                .filter(|e| matcher.is_relevant(&e.text))
                .map(|e| TrainingPair {
                    query: query.clone(),
                    positive: e.id,
                    negatives: Vec::new(),
                })
                .collect()
        })
        .collect();
    let dropped_instances = per_instance.iter().filter(|p| p.is_empty()).count();
    if dropped_instances > 0 {
        log::info!("{dropped_instances} instances have no relevant knowledge");
    }
    PairBuild {
        pairs: per_instance.into_iter().flatten().collect(),
        dropped_instances,
    }
}

/// Shuffle with `seed`, cut into batches of `batch_size`, and give each pair
/// the other positives of its batch as negatives.
pub fn in_batch_batches(mut pairs: Vec<TrainingPair>, batch_size: usize, seed: u64) -> Vec<Vec<TrainingPair>> {
    let batch_size = batch_size.max(1);
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pairs
        .chunks(batch_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|p| {
                    let mut negatives: Vec<KnowledgeId> = Vec::new();
                    for other in chunk {
                        if other.positive != p.positive && !negatives.contains(&other.positive) {
                            negatives.push(other.positive);
                        }
                    }
                    TrainingPair {
                        negatives,
                        ..p.clone()
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllOutput {
    pub loss: f64,
    pub grad_queries: Array2<f64>,
    pub grad_contexts: Array2<f64>,
}

/// Negative log-likelihood of the positive context under a softmax over the
/// whole batch, where row `i` of `contexts` is the positive for row `i` of
/// `queries`:
///
/// loss = −(1/B) Σ_i log softmax_j(q_i · c_j)[i]
///
/// With P the row-wise softmax of S = Q Cᵀ and G = (P − I)/B, the gradients
/// are ∂loss/∂Q = G C and ∂loss/∂C = Gᵀ Q.
pub fn in_batch_nll(queries: ArrayView2<f64>, contexts: ArrayView2<f64>) -> Result<NllOutput> {
    let (b, d) = queries.dim();
    if b == 0 {
        return Err(Error::Shape("batch must hold at least one pair".into()));
    }
    if contexts.dim() != (b, d) {
        return Err(Error::Shape(format!(
            "queries are {b}×{d} but contexts are {}×{}",
            contexts.nrows(),
            contexts.ncols()
        )));
    }

    let mut probs = queries.dot(&contexts.t());
    let mut loss = 0.0;
    for (i, mut row) in probs.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
        let log_norm = max + sum.ln();
        loss += log_norm - row[i];
        row.mapv_inplace(|x| (x - log_norm).exp());
    }
    let scale = 1.0 / b as f64;
    for i in 0..b {
        probs[[i, i]] -= 1.0;
    }
    probs.mapv_inplace(|g| g * scale);

    Ok(NllOutput {
        loss: loss * scale,
        grad_queries: probs.dot(&contexts),
        grad_contexts: probs.t().dot(&queries),
    })
}
