//! Client side of the provider wire protocol: newline-delimited JSON over a
//! subprocess's stdin/stdout, one request in flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odeval::EntailmentProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    EmbedQuery,
    EmbedContext,
    Entail,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::EmbedQuery => "embed_query",
            Op::EmbedContext => "embed_context",
            Op::Entail => "entail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub dim: usize,
    pub caps: Vec<String>,
}

impl Handshake {
    pub fn supports(&self, op: Op) -> bool {
        self.caps.iter().any(|c| c == op.as_str())
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    op: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    premise: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<&'a str>,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    vector: Option<Vec<f32>>,
    score: Option<f64>,
    error: Option<String>,
}

enum Payload {
    Vector(Vec<f32>),
    Score(f64),
}

/// Protocol session over any line reader/writer pair.
pub struct ProviderClient<R, W> {
    reader: R,
    writer: W,
    handshake: Handshake,
    next_id: u64,
    line: String,
}

impl<R: BufRead, W: Write> ProviderClient<R, W> {
    /// Read the handshake line and check that every op in `required` is offered.
    pub fn connect(mut reader: R, writer: W, required: &[Op]) -> Result<Self> {
        let mut line = String::new();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::Provider(format!("reading handshake: {e}")))?;
        if n == 0 {
            return Err(Error::Provider("provider closed before handshake".into()));
        }
        let handshake: Handshake = serde_json::from_str(line.trim())
            .map_err(|e| Error::Provider(format!("bad handshake {:?}: {e}", line.trim())))?;
        if let Some(op) = required.iter().find(|op| !handshake.supports(**op)) {
            return Err(Error::Provider(format!(
                "provider lacks required capability {:?} (offers {:?})",
                op.as_str(),
                handshake.caps
            )));
        }
        Ok(Self {
            reader,
            writer,
            handshake,
            next_id: 1,
            line,
        })
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    pub fn dim(&self) -> usize {
        self.handshake.dim
    }

    fn call(&mut self, op: Op, text: Option<&str>, premise: Option<&str>, hypothesis: Option<&str>) -> Result<Payload> {
        let id = self.next_id;
        self.next_id += 1;
        let req = Request {
            id,
            op: op.as_str(),
            text,
            premise,
            hypothesis,
        };
        let mut buf = serde_json::to_vec(&req).map_err(|e| Error::Provider(e.to_string()))?;
        buf.push(b'\n');
        self.writer
            .write_all(&buf)
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::Provider(format!("writing request {id}: {e}")))?;

        self.line.clear();
        let n = self
            .reader
            .read_line(&mut self.line)
            .map_err(|e| Error::Provider(format!("reading response {id}: {e}")))?;
        if n == 0 {
            return Err(Error::Provider(format!("provider closed while request {id} was pending")));
        }
        let resp: Response = serde_json::from_str(self.line.trim())
            .map_err(|e| Error::Provider(format!("bad response to request {id}: {e}")))?;
        if resp.id != id {
            return Err(Error::Provider(format!("response id {} does not match request {id}", resp.id)));
        }
        if let Some(msg) = resp.error {
            return Err(Error::Provider(format!("{} request {id}: {msg}", op.as_str())));
        }
        match (op, resp.vector, resp.score) {
            (Op::Entail, _, Some(s)) => Ok(Payload::Score(s)),
            (Op::EmbedQuery | Op::EmbedContext, Some(v), _) => Ok(Payload::Vector(v)),
            _ => Err(Error::Provider(format!("response {id} lacks a result for {}", op.as_str()))),
        }
    }

    fn embed(&mut self, op: Op, text: &str) -> Result<Vec<f32>> {
        match self.call(op, Some(text), None, None)? {
            Payload::Vector(v) if v.len() == self.handshake.dim => Ok(v),
            Payload::Vector(v) => Err(Error::DimensionMismatch {
                expected: self.handshake.dim,
                actual: v.len(),
            }),
            Payload::Score(_) => unreachable!(),
        }
    }

    pub fn embed_query(&mut self, text: &str) -> Result<Vec<f32>> {
        self.embed(Op::EmbedQuery, text)
    }

    pub fn embed_context(&mut self, text: &str) -> Result<Vec<f32>> {
        self.embed(Op::EmbedContext, text)
    }

    /// Raw provider score; callers clamp.
    pub fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64> {
        match self.call(Op::Entail, None, Some(premise), Some(hypothesis))? {
            Payload::Score(s) => Ok(s),
            Payload::Vector(_) => unreachable!(),
        }
    }
}

impl<R: BufRead, W: Write> EntailmentProvider for ProviderClient<R, W> {
    fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64> {
        ProviderClient::entail(self, premise, hypothesis)
    }
}

/// A provider running as a child process. The command line is split on
/// whitespace; the first word is the program.
pub struct SubprocessProvider {
    child: Child,
    client: ProviderClient<BufReader<ChildStdout>, ChildStdin>,
}

impl SubprocessProvider {
    pub fn spawn(command: &str, required: &[Op]) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Provider("empty provider command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Provider(format!("spawning {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        match ProviderClient::connect(BufReader::new(stdout), stdin, required) {
            Ok(client) => Ok(Self { child, client }),
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn client(&mut self) -> &mut ProviderClient<BufReader<ChildStdout>, ChildStdin> {
        &mut self.client
    }

    pub fn dim(&self) -> usize {
        self.client.dim()
    }
}

impl EntailmentProvider for SubprocessProvider {
    fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64> {
        self.client.entail(premise, hypothesis)
    }
}

impl Drop for SubprocessProvider {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved provider exit on EOF.
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
