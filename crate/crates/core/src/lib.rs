//! Retriever-reader engine for knowledge-based visual question answering:
//! corpus construction from search snippets, BM25 and dense retrieval,
//! extractive span decoding and answer aggregation, and the retrieval,
//! soft-accuracy and entailment-based evaluation metrics.

pub mod corpus;
pub mod error;
pub mod io;
pub mod metrics;
pub mod odeval;
pub mod provider;
pub mod reader;
pub mod retriever;
pub mod text;

pub use error::{Error, Result};
