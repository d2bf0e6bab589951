use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use vrr_core::corpus::{
    clean_corpus, ingest, load_corpus, parse_search_results, save_corpus, BadWords, WindowRatioFilter,
};
use vrr_core::io::{read_jsonl, write_json, write_jsonl};
use vrr_core::metrics::{evaluate_retrieval, evaluate_run, load_instances, load_predictions, Prediction};
use vrr_core::odeval::{evaluate_open, ground_question, EntailmentProvider, ExactMatchEntailment, Grounding};
use vrr_core::provider::{Op, SubprocessProvider};
use vrr_core::reader::{read_pipeline, CandidateFileSource, CandidateSource, ScoreMatrixSource, Strategy, DEFAULT_MAX_SPAN_LEN};
use vrr_core::retriever::{
    build_query_text, build_training_pairs, in_batch_batches, read_embeddings, read_hits, read_query_vectors,
    write_embeddings_binary, write_embeddings_jsonl, write_hits, Bm25Index, Bm25Params, DenseIndex, Embeddings,
    MatchMode,
};
use vrr_core::Error;

/// Provider value that runs exact-match entailment in process.
const BUILTIN_EXACT: &str = "builtin:exact";

#[derive(Parser)]
#[command(name = "vrr", version, about = "Retriever-reader pipeline for knowledge-based VQA")]
struct Cli {
    /// Seed for any sampling step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetrieverMode {
    Bm25,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbeddingFormat {
    Binary,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Score,
    Freq,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Score => Strategy::HighestScore,
            StrategyArg::Freq => Strategy::HighestFrequency,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a knowledge corpus from search-result JSON Lines.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write filter and dedup counts as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Drop entries with bad words, JavaScript, lorem ipsum or curly brackets.
    Clean {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bad_words: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a BM25 index over a corpus.
    IndexBm25 {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
    },
    /// Embed every corpus entry with a provider's context encoder.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        provider: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: EmbeddingFormat,
    },
    /// Retrieve the top-K knowledge for each question.
    Retrieve {
        #[arg(long, value_enum)]
        mode: RetrieverMode,
        /// JSON Lines with qid, question and optional caption.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        /// BM25 index (bm25 mode).
        #[arg(long)]
        index: Option<PathBuf>,
        /// Context embeddings (dense mode).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Precomputed `{"qid", "vec"}` query vectors (dense mode).
        #[arg(long, conflicts_with = "provider")]
        query_embeddings: Option<PathBuf>,
        /// Provider command that embeds queries (dense mode).
        #[arg(long)]
        provider: Option<String>,
    },
    /// Precision*/Recall* of retrieval output at K.
    EvalRetrieval {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        /// Match answers as substrings instead of whole tokens.
        #[arg(long)]
        substring: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode and aggregate answers over the retrieved knowledge.
    Read {
        #[arg(long)]
        hits: PathBuf,
        /// Start/end score matrices per (qid, kid).
        #[arg(long, required_unless_present = "candidates", conflicts_with = "candidates")]
        scores: Option<PathBuf>,
        /// Precomputed answer candidates per (qid, kid).
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, value_enum, default_value = "score")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = DEFAULT_MAX_SPAN_LEN as u64, value_parser = clap::value_parser!(u64).range(1..))]
        max_span_len: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Soft VQA accuracy of predictions.
    ScoreVqa {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entailment-based open-domain accuracy.
    Odeval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        /// Provider command, or `builtin:exact` for exact-match entailment.
        #[arg(long)]
        provider: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn questions into declarative statements with an answer slot.
    Ground {
        /// JSON Lines with qid and question.
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump weakly supervised training batches with in-batch negatives.
    TrainPairs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long)]
        substring: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Deserialize)]
struct QueryLine {
    qid: String,
    question: String,
    #[serde(default)]
    caption: String,
}

#[derive(Serialize)]
struct GroundingLine<'a> {
    qid: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    template: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<&'static str>,
}

#[derive(Serialize)]
struct PairLine<'a> {
    batch: usize,
    question: &'a str,
    caption: &'a str,
    positive: u64,
    negatives: Vec<u64>,
}

fn require_files(paths: &[&Path]) -> Result<()> {
    for p in paths {
        ensure!(p.is_file(), "input file not found: {}", p.display());
    }
    Ok(())
}

fn match_mode(substring: bool) -> MatchMode {
    if substring {
        MatchMode::Substring
    } else {
        MatchMode::Token
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, out, stats } => {
            require_files(&[&input])?;
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let parsed = parse_search_results(&bytes)?;
            let (corpus, counts) = ingest(&parsed.results, &WindowRatioFilter::default());
            log::info!(
                "kept {} of {} snippets ({} items without snippet)",
                counts.kept,
                counts.snippets,
                parsed.skipped_items
            );
            save_corpus(&corpus, &out)?;
            if let Some(path) = stats {
                write_json(&path, &counts)?;
            }
        }
        Command::Clean { corpus, bad_words, out } => {
            require_files(&[&corpus])?;
            let bad = BadWords::load(&bad_words)?;
            let (cleaned, removed) = clean_corpus(load_corpus(&corpus)?, &bad);
            log::info!("removed {removed} entries, {} remain", cleaned.len());
            save_corpus(&cleaned, &out)?;
        }
        Command::IndexBm25 { corpus, out, k1, b } => {
            require_files(&[&corpus])?;
            ensure!(k1 >= 0.0 && (0.0..=1.0).contains(&b), "need k1 >= 0 and 0 <= b <= 1");
            let corpus = load_corpus(&corpus)?;
            Bm25Index::build(&corpus, Bm25Params { k1, b }).save(&out)?;
        }
        Command::Embed {
            corpus,
            provider,
            out,
            format,
        } => {
            require_files(&[&corpus])?;
            let corpus = load_corpus(&corpus)?;
            let mut provider = SubprocessProvider::spawn(&provider, &[Op::EmbedContext])?;
            let dim = provider.dim();
            let mut records = Vec::with_capacity(corpus.len());
            for e in corpus.entries() {
                records.push((e.id, provider.client().embed_context(&e.text)?));
            }
            let embeddings = Embeddings { dim, records };
            match format {
                EmbeddingFormat::Binary => write_embeddings_binary(&out, &embeddings)?,
                EmbeddingFormat::Jsonl => write_embeddings_jsonl(&out, &embeddings)?,
            }
        }
        Command::Retrieve {
            mode,
            queries,
            out,
            k,
            index,
            embeddings,
            query_embeddings,
            provider,
        } => {
            require_files(&[&queries])?;
            let k = k as usize;
            let queries: Vec<QueryLine> = read_jsonl(&queries)?;
            let results = match mode {
                RetrieverMode::Bm25 => {
                    let index = index.context("--index is required in bm25 mode")?;
                    require_files(&[&index])?;
                    let index = Bm25Index::load(&index)?;
                    let texts: Vec<(String, String)> = queries
                        .iter()
                        .map(|q| (q.qid.clone(), build_query_text(&q.question, &q.caption)))
                        .collect();
                    index.search_many(&texts, k)
                }
                RetrieverMode::Dense => {
                    let embeddings = embeddings.context("--embeddings is required in dense mode")?;
                    require_files(&[&embeddings])?;
                    let index = DenseIndex::new(read_embeddings(&embeddings)?)?;
                    let vectors = match (query_embeddings, provider) {
                        (Some(path), _) => {
                            require_files(&[&path])?;
                            let mut by_qid: HashMap<String, Vec<f32>> = read_query_vectors(&path)?.into_iter().collect();
                            queries
                                .iter()
                                .map(|q| {
                                    by_qid
                                        .remove(&q.qid)
                                        .map(|v| (q.qid.clone(), v))
                                        .with_context(|| format!("no query vector for {}", q.qid))
                                })
                                .collect::<Result<Vec<_>>>()?
                        }
                        (None, Some(cmd)) => {
                            let mut provider = SubprocessProvider::spawn(&cmd, &[Op::EmbedQuery])?;
                            ensure!(
                                provider.dim() == index.dim(),
                                "provider dim {} differs from embedding dim {}",
                                provider.dim(),
                                index.dim()
                            );
                            let mut vectors = Vec::with_capacity(queries.len());
                            for q in &queries {
                                let text = build_query_text(&q.question, &q.caption);
                                vectors.push((q.qid.clone(), provider.client().embed_query(&text)?));
                            }
                            vectors
                        }
                        (None, None) => bail!("dense mode needs --query-embeddings or --provider"),
                    };
                    index.search_many(&vectors, k)?
                }
            };
            write_hits(&out, &results)?;
        }
        Command::EvalRetrieval {
            hits,
            corpus,
            instances,
            k,
            substring,
            out,
        } => {
            require_files(&[&hits, &corpus, &instances])?;
            let report = evaluate_retrieval(
                &read_hits(&hits)?,
                &load_corpus(&corpus)?,
                &load_instances(&instances)?,
                k as usize,
                match_mode(substring),
            )?;
            write_json(&out, &report)?;
        }
        Command::Read {
            hits,
            scores,
            candidates,
            k,
            strategy,
            max_span_len,
            out,
        } => {
            require_files(&[&hits])?;
            let source: Box<dyn CandidateSource> = match (scores, candidates) {
                (Some(path), _) => {
                    require_files(&[&path])?;
                    Box::new(ScoreMatrixSource::load(&path, max_span_len as usize)?)
                }
                (None, Some(path)) => {
                    require_files(&[&path])?;
                    Box::new(CandidateFileSource::load(&path)?)
                }
                (None, None) => bail!("one of --scores or --candidates is required"),
            };
            let mut preds = Vec::new();
            let mut empty = 0;
            for r in read_hits(&hits)? {
                let answer = match read_pipeline(&r, source.as_ref(), strategy.into(), k as usize) {
                    Ok(a) => a,
                    Err(Error::NoCandidates) => {
                        empty += 1;
                        String::new()
                    }
                    Err(e) => return Err(e.into()),
                };
                preds.push(Prediction {
                    qid: r.query_id,
                    answer,
                });
            }
            if empty > 0 {
                log::warn!("{empty} questions had no answerable candidate");
            }
            write_jsonl(&out, &preds)?;
        }
        Command::ScoreVqa { preds, instances, out } => {
            require_files(&[&preds, &instances])?;
            let report = evaluate_run(&load_predictions(&preds)?, &load_instances(&instances)?)?;
            write_json(&out, &report)?;
        }
        Command::Odeval {
            preds,
            instances,
            provider,
            out,
        } => {
            require_files(&[&preds, &instances])?;
            let preds = load_predictions(&preds)?;
            let instances = load_instances(&instances)?;
            let mut entail: Box<dyn EntailmentProvider> = if provider == BUILTIN_EXACT {
                Box::new(ExactMatchEntailment)
            } else {
                Box::new(SubprocessProvider::spawn(&provider, &[Op::Entail])?)
            };
            let report = evaluate_open(&preds, &instances, entail.as_mut())?;
            log::info!(
                "open accuracy {:.4} over {} of {} questions",
                report.open_accuracy,
                report.evaluated,
                report.questions
            );
            write_json(&out, &report)?;
        }
        Command::Ground { questions, out } => {
            require_files(&[&questions])?;
            let questions: Vec<QueryLine> = read_jsonl(&questions)?;
            let groundings: Vec<Grounding> = questions.iter().map(|q| ground_question(&q.qid, &q.question)).collect();
            let lines: Vec<GroundingLine> = questions
                .iter()
                .zip(&groundings)
                .map(|(q, g)| match g {
                    Grounding::Grounded(s) => GroundingLine {
                        qid: &q.qid,
                        template: Some(&s.template),
                        rule: Some(s.rule.as_str()),
                        skipped: None,
                    },
                    Grounding::Skipped(reason) => GroundingLine {
                        qid: &q.qid,
                        template: None,
                        rule: None,
                        skipped: Some(reason.as_str()),
                    },
                })
                .collect();
            let grounded = groundings.iter().filter(|g| g.statement().is_some()).count();
            log::info!("grounded {grounded} of {} questions", questions.len());
            write_jsonl(&out, &lines)?;
        }
        Command::TrainPairs {
            corpus,
            instances,
            batch_size,
            substring,
            out,
        } => {
            require_files(&[&corpus, &instances])?;
            let built = build_training_pairs(
                &load_instances(&instances)?,
                &load_corpus(&corpus)?,
                match_mode(substring),
            );
            let batches = in_batch_batches(built.pairs, batch_size as usize, cli.seed);
            let lines: Vec<PairLine> = batches
                .iter()
                .enumerate()
                .flat_map(|(b, batch)| {
                    batch.iter().map(move |p| PairLine {
                        batch: b,
                        question: &p.query.question,
                        caption: &p.query.caption,
                        positive: p.positive.0,
                        negatives: p.negatives.iter().map(|n| n.0).collect(),
                    })
                })
                .collect();
            write_jsonl(&out, &lines)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
