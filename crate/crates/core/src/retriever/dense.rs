//! Exact inner-product search over provider vectors, and the embedding file
//! formats.
//!
//! Binary layout (little-endian): `b"OKEM"`, `u32` version = 1, `u32` dim,
//! `u64` count, then `count` records of `u64` id followed by `dim` × `f32`.
//! JSON Lines `{"id": int, "vec": [float]}` is accepted as well.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{top_k, Hit, RetrievalResult};
use crate::corpus::{Corpus, KnowledgeId};
use crate::error::{Error, Result};
use crate::io::{parse_jsonl, read_jsonl, write_jsonl};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"OKEM";
pub const EMBEDDING_VERSION: u32 = 1;

/// Vectors keyed by knowledge id, all of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub records: Vec<(KnowledgeId, Vec<f32>)>,
}

/// Context vectors, stored contiguously in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    ids: Vec<KnowledgeId>,
    data: Vec<f32>,
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

impl DenseIndex {
    /// Build from vectors in any order. Rejects duplicate ids and vectors
    /// whose length differs from `dim`.
    pub fn new(embeddings: Embeddings) -> Result<Self> {
        let Embeddings { dim, mut records } = embeddings;
        if dim == 0 {
            return Err(Error::Embedding("dimension must be positive".into()));
        }
        records.sort_by_key(|(id, _)| *id);
        if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Embedding(format!("duplicate id {}", w[0].0)));
        }
        let mut ids = Vec::with_capacity(records.len());
        let mut data = Vec::with_capacity(records.len() * dim);
        for (id, v) in records {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Ok(Self { dim, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, id: KnowledgeId) -> Option<&[f32]> {
        let i = self.ids.binary_search(&id).ok()?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Every corpus entry has exactly one vector and vice versa.
    pub fn check_matches(&self, corpus: &Corpus) -> Result<()> {
        let corpus_ids: Vec<KnowledgeId> = corpus.ids().collect();
        if corpus_ids == self.ids {
            return Ok(());
        }
        let have: HashSet<_> = self.ids.iter().collect();
        let missing = corpus_ids.iter().filter(|id| !have.contains(id)).count();
        Err(Error::Embedding(format!(
            "index has {} vectors, corpus has {} entries, {missing} corpus ids without a vector",
            self.ids.len(),
            corpus_ids.len()
        )))
    }

    /// Exhaustive top-`k` by dot product, ties by ascending id.
    pub fn search(&self, query_id: &str, query: &[f32], k: usize) -> Result<RetrievalResult> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let hits = self
            .data
            .chunks_exact(self.dim)
            .zip(&self.ids)
            .map(|(v, &id)| Hit { id, score: dot(v, query) })
            .collect();
        Ok(RetrievalResult {
            query_id: query_id.to_string(),
            hits: top_k(hits, k),
        })
    }

    pub fn search_many(&self, queries: &[(String, Vec<f32>)], k: usize) -> Result<Vec<RetrievalResult>> {
        queries.par_iter().map(|(qid, v)| self.search(qid, v, k)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct VectorLine {
    id: u64,
    vec: Vec<f32>,
}

#[derive(Deserialize)]
struct QueryVectorLine {
    qid: String,
    vec: Vec<f32>,
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Embedding(format!("truncated while reading {what}: {e}")))
}

fn read_binary<R: Read>(mut r: R) -> Result<Embeddings> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read_exact(&mut r, &mut b4, "magic")?;
    if &b4 != EMBEDDING_MAGIC {
        return Err(Error::Embedding("bad magic".into()));
    }
    read_exact(&mut r, &mut b4, "version")?;
    let version = u32::from_le_bytes(b4);
    if version != EMBEDDING_VERSION {
        return Err(Error::Embedding(format!("unsupported version {version}")));
    }
    read_exact(&mut r, &mut b4, "dim")?;
    let dim = u32::from_le_bytes(b4) as usize;
    read_exact(&mut r, &mut b8, "count")?;
    let count = u64::from_le_bytes(b8);

    let mut records = Vec::new();
    let mut raw = vec![0u8; dim * 4];
    for i in 0..count {
        read_exact(&mut r, &mut b8, &format!("id of record {i}"))?;
        let id = KnowledgeId(u64::from_le_bytes(b8));
        read_exact(&mut r, &mut raw, &format!("vector of record {i}"))?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push((id, v));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Embedding(e.to_string()))? != 0 {
        return Err(Error::Embedding("trailing bytes after last record".into()));
    }
    Ok(Embeddings { dim, records })
}

/// Read either the binary format (detected by its magic) or JSON Lines.
pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut head = [0u8; 4];
    let n = file.read(&mut head).map_err(|e| Error::io(path, e))?;
    let file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    if n == 4 && &head == EMBEDDING_MAGIC {
        return read_binary(file);
    }
    let lines: Vec<VectorLine> = parse_jsonl(file)?;
    let dim = lines.first().map_or(0, |l| l.vec.len());
    if let Some((i, l)) = lines.iter().enumerate().find(|(_, l)| l.vec.len() != dim) {
        return Err(Error::parse(
            i + 1,
            format!("vector length {} differs from {dim}", l.vec.len()),
        ));
    }
    Ok(Embeddings {
        dim,
        records: lines.into_iter().map(|l| (KnowledgeId(l.id), l.vec)).collect(),
    })
}

pub fn write_embeddings_binary(path: &Path, embeddings: &Embeddings) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(EMBEDDING_MAGIC).map_err(io)?;
    w.write_all(&EMBEDDING_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(embeddings.dim as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(embeddings.records.len() as u64).to_le_bytes()).map_err(io)?;
    for (id, v) in &embeddings.records {
        if v.len() != embeddings.dim {
            return Err(Error::DimensionMismatch {
                expected: embeddings.dim,
                actual: v.len(),
            });
        }
        w.write_all(&id.0.to_le_bytes()).map_err(io)?;
        for x in v {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_embeddings_jsonl(path: &Path, embeddings: &Embeddings) -> Result<()> {
    let rows: Vec<VectorLine> = embeddings
        .records
        .iter()
        .map(|(id, v)| VectorLine { id: id.0, vec: v.clone() })
        .collect();
    write_jsonl(path, &rows)
}

/// Query vectors as JSON Lines `{"qid": str, "vec": [float]}`.
pub fn read_query_vectors(path: &Path) -> Result<Vec<(String, Vec<f32>)>> {
    let lines: Vec<QueryVectorLine> = read_jsonl(path)?;
    Ok(lines.into_iter().map(|l| (l.qid, l.vec)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(vectors: &[(u64, Vec<f32>)]) -> DenseIndex {
        let dim = vectors[0].1.len();
        DenseIndex::new(Embeddings {
            dim,
            records: vectors.iter().map(|(id, v)| (KnowledgeId(*id), v.clone())).collect(),
        })
        .unwrap()
    }

    #[test]
    fn matching_vector_ranks_first() {
        let idx = index(&[(0, vec![0.0, 1.0, 0.0]), (1, vec![2.0, 0.0, 1.0]), (2, vec![0.0, 0.0, 0.0])]);
        let r = idx.search("q", &[2.0, 0.0, 1.0], 3).unwrap();
        assert_eq!(r.hits[0].id, KnowledgeId(1));
        assert_eq!(r.hits[0].score, 5.0);
    }

    #[test]
    fn zero_query_ties_by_id() {
        let idx = index(&[(7, vec![1.0, 2.0]), (3, vec![-1.0, 4.0]), (5, vec![0.5, 0.5])]);
        let r = idx.search("q", &[0.0, 0.0], 2).unwrap();
        let ids: Vec<u64> = r.hits.iter().map(|h| h.id.0).collect();
        assert_eq!(ids, [3, 5]);
        assert!(r.hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let idx = index(&[(0, vec![1.0, 2.0])]);
        assert!(matches!(
            idx.search("q", &[1.0], 1),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        let bad = DenseIndex::new(Embeddings {
            dim: 2,
            records: vec![(KnowledgeId(0), vec![1.0])],
        });
        assert!(bad.is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let bad = DenseIndex::new(Embeddings {
            dim: 1,
            records: vec![(KnowledgeId(4), vec![1.0]), (KnowledgeId(4), vec![2.0])],
        });
        assert!(matches!(bad, Err(Error::Embedding(_))));
    }

    #[test]
    fn binary_and_jsonl_formats_agree() {
        let emb = Embeddings {
            dim: 3,
            records: vec![
                (KnowledgeId(2), vec![0.1, -2.5, f32::MIN_POSITIVE]),
                (KnowledgeId(9), vec![1e-30, 3.0, 7.25]),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("e.okem");
        let jsonl = dir.path().join("e.jsonl");
        write_embeddings_binary(&bin, &emb).unwrap();
        write_embeddings_jsonl(&jsonl, &emb).unwrap();
        assert_eq!(read_embeddings(&bin).unwrap(), emb);
        assert_eq!(read_embeddings(&jsonl).unwrap(), emb);

        let bytes = std::fs::read(&bin).unwrap();
        assert_eq!(&bytes[..4], b"OKEM");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 8 + 2 * (8 + 3 * 4));
        std::fs::write(&bin, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_embeddings(&bin).is_err());
    }

    #[test]
    fn corpus_alignment_check() {
        let corpus = crate::corpus::corpus_from_texts(["a", "b"]);
        assert!(index(&[(1, vec![1.0]), (0, vec![2.0])]).check_matches(&corpus).is_ok());
        assert!(index(&[(0, vec![1.0])]).check_matches(&corpus).is_err());
    }
}
