//! Client for an external heatmap process speaking JSON lines: one request
//! object per line on its stdin, one response (or `{"error": ...}`) per line on
//! its stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::heatmap::{HeatmapMatrix, HeatmapProvider};
use super::tokenize::TokenizedText;
use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    MeanLayersHeads,
    LastLayerMeanHeads,
    MaxHeads,
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    document_text: &'a str,
    output_text: &'a str,
    aggregation: Aggregation,
}

#[derive(Debug, Deserialize)]
struct Response {
    doc_tokens: Vec<String>,
    doc_char_spans: Vec<(usize, usize)>,
    out_tokens: Vec<String>,
    out_char_spans: Vec<(usize, usize)>,
    scores: Vec<Vec<f64>>,
}

/// Turn code-point spans into byte spans of `text`.
fn byte_spans(text: &str, spans: &[(usize, usize)]) -> Result<Vec<(usize, usize)>, EvalError> {
    let offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len())).collect();
    spans
        .iter()
        .map(|&(s, e)| match (offsets.get(s), offsets.get(e)) {
            (Some(&bs), Some(&be)) => Ok((bs, be)),
            _ => Err(EvalError::InvalidTokens(format!("span ({s}, {e}) is outside the text"))),
        })
        .collect()
}

/// Validate one response line against the texts it answers.
pub fn parse_heatmap_response(document_text: &str, output_text: &str, line: &str) -> Result<HeatmapMatrix, EvalError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| EvalError::ProviderError(format!("unreadable response: {e}")))?;
    if let Some(err) = value.get("error") {
        let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(EvalError::ProviderError(msg));
    }
    let r: Response =
        serde_json::from_value(value).map_err(|e| EvalError::ProviderError(format!("malformed response: {e}")))?;
    let doc = TokenizedText::new(document_text, r.doc_tokens, byte_spans(document_text, &r.doc_char_spans)?)?;
    let out = TokenizedText::new(output_text, r.out_tokens, byte_spans(output_text, &r.out_char_spans)?)?;
    HeatmapMatrix::new(out, doc, r.scores)
}

/// JSON-lines provider over any reader/writer pair. Requests on one
/// connection are serialized.
pub struct JsonLinesProvider<R, W> {
    conn: Mutex<(R, W)>,
    aggregation: Aggregation,
}

impl<R: BufRead + Send, W: Write + Send> JsonLinesProvider<R, W> {
    pub fn new(reader: R, writer: W, aggregation: Aggregation) -> Self {
        Self { conn: Mutex::new((reader, writer)), aggregation }
    }

    fn round_trip(&self, document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError> {
        let request = Request { document_text, output_text, aggregation: self.aggregation };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        let mut guard = self.conn.lock().map_err(|_| EvalError::ProviderError("connection poisoned".into()))?;
        let (reader, writer) = &mut *guard;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| EvalError::ProviderError(format!("write failed: {e}")))?;
        let mut response = String::new();
        let n = reader.read_line(&mut response).map_err(|e| EvalError::ProviderError(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(EvalError::ProviderError("provider closed the stream".into()));
        }
        drop(guard);
        parse_heatmap_response(document_text, output_text, response.trim_end())
    }
}

impl<R: BufRead + Send, W: Write + Send> HeatmapProvider for JsonLinesProvider<R, W> {
    fn heatmap(&self, document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError> {
        self.round_trip(document_text, output_text)
    }
}

/// A spawned provider process. The child is killed on drop.
pub struct ProcessHeatmapProvider {
    client: JsonLinesProvider<BufReader<ChildStdout>, ChildStdin>,
    child: Child,
}

impl ProcessHeatmapProvider {
    pub fn spawn(program: &str, args: &[String], aggregation: Aggregation) -> Result<Self, EvalError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::ProviderError(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self { client: JsonLinesProvider::new(BufReader::new(stdout), stdin, aggregation), child })
    }
}

impl HeatmapProvider for ProcessHeatmapProvider {
    fn heatmap(&self, document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError> {
        self.client.heatmap(document_text, output_text)
    }
}

impl Drop for ProcessHeatmapProvider {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
