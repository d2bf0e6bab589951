//! Deterministic stand-in for a model provider. Embeddings are signed
//! feature hashes of the BM25 tokens, L2-normalized; entailment is 1 for
//! identical sentences and 0 otherwise.

use std::io::{BufRead, Write};

use anyhow::Result;
use clap::Parser;
use serde_json::{json, Value};

use vrr_core::text::tokenize;

const ALL_CAPS: &str = "embed_query,embed_context,entail";

#[derive(Parser)]
#[command(name = "vrr-stub-provider", version)]
struct Args {
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Comma-separated ops to advertise.
    #[arg(long, default_value = ALL_CAPS)]
    caps: String,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn embed(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim];
    for tok in tokenize(text) {
        let h = fnv1a(&tok);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn respond(req: &Value, dim: usize, caps: &[&str]) -> Value {
    let id = req.get("id").cloned().unwrap_or(Value::Null);
    let op = req.get("op").and_then(Value::as_str).unwrap_or("");
    if !caps.contains(&op) {
        return json!({"id": id, "error": format!("unknown op {op:?}")});
    }
    let field = |name: &str| req.get(name).and_then(Value::as_str);
    match op {
        "embed_query" | "embed_context" => match field("text") {
            Some(text) => json!({"id": id, "vector": embed(text, dim)}),
            None => json!({"id": id, "error": "missing text"}),
        },
        _ => match (field("premise"), field("hypothesis")) {
            (Some(p), Some(h)) => json!({"id": id, "score": if p == h { 1.0 } else { 0.0 }}),
            _ => json!({"id": id, "error": "missing premise or hypothesis"}),
        },
    }
}

fn main() -> Result<()> {
    let args = Args::parse();
    let caps: Vec<&str> = args.caps.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", json!({"dim": args.dim, "caps": caps}))?;
    out.flush()?;
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Value>(&line) {
            Ok(req) => respond(&req, args.dim, &caps),
            Err(e) => json!({"id": Value::Null, "error": format!("malformed request: {e}")}),
        };
        writeln!(out, "{resp}")?;
        out.flush()?;
    }
    Ok(())
}
