//! Comparison methods: one-prompt generation over the whole document, and the
//! same prompt over content picked by tf-idf retrieval, LLM retrieval, or LLM
//! retrieval driven by decomposed sub-queries. None of them validate, refine
//! or consult the chart-type rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::chart::{chart_from_value, ChartData};
use crate::extract::FORMAT_REMINDER;
use crate::ingest::{render_blocks, render_context, BlockKind, Document};
use crate::llm::prompts::slots;
use crate::llm::{parse_json_payload, LlmError, RoleTag, Session, CHART_SCHEMA};
use crate::text;
use crate::typing::{ChartType, ChartTypeRecommendation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("document is empty")]
    EmptyContent,
    #[error("document of {chars} characters exceeds the context budget of {budget} characters")]
    ContextOverflow { chars: usize, budget: usize },
    #[error("generation failed after {attempts} attempts: {last_error}")]
    GenerationFailed { attempts: usize, last_error: String },
    #[error("retriever selected no segment")]
    NoSelection,
    #[error("no <sub_c>concept:attribute</sub_c> pair in the response")]
    NoSubqueries,
    #[error("unknown baseline method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    SingleStep,
    EmbedRetrieval,
    LlmRetrieval,
    LlmRetrievalQd,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [
        BaselineMethod::SingleStep,
        BaselineMethod::EmbedRetrieval,
        BaselineMethod::LlmRetrieval,
        BaselineMethod::LlmRetrievalQd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMethod::SingleStep => "single_step",
            BaselineMethod::EmbedRetrieval => "embed_retrieval",
            BaselineMethod::LlmRetrieval => "llm_retrieval",
            BaselineMethod::LlmRetrievalQd => "llm_retrieval_qd",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMethod {
    type Err = BaselineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| BaselineError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Segments kept by tf-idf retrieval.
    pub k: usize,
    /// Largest rendered document the single-step prompt accepts, in characters.
    pub max_context_chars: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { k: 5, max_context_chars: 400_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Position in the segment list; segment ids for de-duplication.
    pub index: usize,
    pub heading_path: Vec<String>,
    pub text: String,
    pub page_range: (u32, u32),
}

/// Split at headings. A segment runs from its heading to the next heading of
/// the same or a higher level, so a section's segment contains its
/// subsections. Content before the first heading forms a root segment.
pub fn segment_by_headings(doc: &Document) -> Vec<Segment> {
    let blocks = &doc.blocks;
    let mut segments = Vec::new();
    let mut path: Vec<(u8, String)> = Vec::new();
    let mut push = |range: &[crate::ingest::Block], heading_path: Vec<String>| {
        let text = render_blocks(range);
        if text.trim().is_empty() {
            return;
        }
        let first = range.first().map_or(1, |b| b.page);
        let last = range.last().map_or(first, |b| b.page);
        segments.push(Segment { index: 0, heading_path, text, page_range: (first, last) });
    };
    let first_heading = blocks.iter().position(|b| b.heading_level().is_some()).unwrap_or(blocks.len());
    if first_heading > 0 {
        push(&blocks[..first_heading], Vec::new());
    }
    for (i, block) in blocks.iter().enumerate() {
        let Some(level) = block.heading_level() else { continue };
        while path.last().is_some_and(|(l, _)| *l >= level) {
            path.pop();
        }
        path.push((level, block.text.clone()));
        let end = blocks[i + 1..]
            .iter()
            .position(|b| b.heading_level().is_some_and(|l| l <= level))
            .map_or(blocks.len(), |p| i + 1 + p);
        push(&blocks[i..end], path.iter().map(|(_, t)| t.clone()).collect());
    }
    for (i, s) in segments.iter_mut().enumerate() {
        s.index = i;
    }
    segments
}

/// Dense vectors for a query and its candidate passages.
pub trait Embedder {
    fn embed(&self, query: &str, passages: &[&str]) -> (Vec<f64>, Vec<Vec<f64>>);
}

/// Tf-idf over stemmed keywords, with smoothed idf fitted on the passages.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfidfEmbedder;

impl Embedder for TfidfEmbedder {
    fn embed(&self, query: &str, passages: &[&str]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let docs: Vec<Vec<String>> = passages.iter().map(|p| text::keywords(p)).collect();
        let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
        for w in docs.iter().flatten() {
            let next = vocab.len();
            vocab.entry(w.as_str()).or_insert(next);
        }
        let mut df = vec![0usize; vocab.len()];
        for d in &docs {
            let uniq: BTreeSet<usize> = d.iter().map(|w| vocab[w.as_str()]).collect();
            for j in uniq {
                df[j] += 1;
            }
        }
        let n = passages.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0).collect();
        let vectorize = |words: &[String]| {
            let mut v = vec![0.0; vocab.len()];
            for w in words {
                if let Some(&j) = vocab.get(w.as_str()) {
                    v[j] += idf[j];
                }
            }
            v
        };
        let q = vectorize(&text::keywords(query));
        (q, docs.iter().map(|d| vectorize(d)).collect())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top `k` segments by cosine similarity to the intent, best first; ties keep
/// document order.
pub fn embed_retrieve<'s>(
    intent: &str,
    segments: &'s [Segment],
    k: usize,
    embedder: &dyn Embedder,
) -> Vec<&'s Segment> {
    let texts: Vec<&str> = segments.iter().map(|s| s.text.as_str()).collect();
    let (q, vectors) = embedder.embed(intent, &texts);
    let mut scored: Vec<(usize, f64)> = vectors.iter().enumerate().map(|(i, v)| (i, cosine(&q, v))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(k.max(1)).map(|(i, _)| &segments[i]).collect()
}

fn numbered_segments(segments: &[Segment]) -> String {
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| format!("--- Segment {} ---\n{}", i + 1, s.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn parse_selection(text: &str) -> Option<Vec<i64>> {
    let as_ints = |v: &Value| -> Option<Vec<i64>> {
        v.as_array()?.iter().map(|x| x.as_i64().or_else(|| x.as_str()?.trim().parse().ok())).collect()
    };
    if let Ok(v) = parse_json_payload(text) {
        return v.get("selected_segments").and_then(as_ints);
    }
    serde_json::from_str::<Value>(text.trim()).ok().as_ref().and_then(as_ints)
}

/// Let the model pick segments. Returns 0-based segment indices in document
/// order without duplicates; out-of-range picks are dropped.
pub fn llm_retrieve(intent: &str, segments: &[Segment], session: Session<'_>) -> Result<Vec<usize>, BaselineError> {
    let mut prompt =
        session.prompt(RoleTag::Retrieve, &slots([("intent", intent), ("segments", &numbered_segments(segments))]))?;
    for attempt in 0..2 {
        if attempt > 0 {
            prompt.text.push_str(FORMAT_REMINDER);
        }
        let Some(picks) = parse_selection(&session.send(&prompt)?) else {
            warn!(attempt, "retrieval response has no segment list");
            continue;
        };
        let mut chosen = BTreeSet::new();
        for p in picks {
            if p >= 1 && (p as usize) <= segments.len() {
                chosen.insert(p as usize - 1);
            } else {
                warn!("retriever picked segment {p} of {}", segments.len());
            }
        }
        if chosen.is_empty() {
            return Err(BaselineError::NoSelection);
        }
        return Ok(chosen.into_iter().collect());
    }
    Err(BaselineError::NoSelection)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubQuery {
    pub concept: String,
    pub attribute: String,
}

impl fmt::Display for SubQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<sub_c>{}:{}</sub_c>", self.concept, self.attribute)
    }
}

/// Every well-formed `<sub_c>concept:attribute</sub_c>` tag, first occurrence kept.
pub fn parse_subqueries(text: &str) -> Vec<SubQuery> {
    let tag = Regex::new(r"<sub_c>([^<]*)</sub_c>").expect("valid regex");
    let mut out: Vec<SubQuery> = Vec::new();
    for c in tag.captures_iter(text) {
        let Some((concept, attribute)) = c[1].split_once(':') else { continue };
        let q = SubQuery { concept: concept.trim().to_string(), attribute: attribute.trim().to_string() };
        if !q.concept.is_empty() && !q.attribute.is_empty() && !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

pub fn decompose_query(intent: &str, session: Session<'_>) -> Result<Vec<SubQuery>, BaselineError> {
    let text = session.call(RoleTag::Decompose, &slots([("intent", intent)]))?;
    let qs = parse_subqueries(&text);
    if qs.is_empty() {
        return Err(BaselineError::NoSubqueries);
    }
    Ok(qs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutput {
    pub data: ChartData,
    pub recommendation: ChartTypeRecommendation,
    /// Segment indices the retriever used; `None` for single-step.
    pub retrieved: Option<Vec<usize>>,
}

fn naive_chart_type(v: &Value) -> ChartTypeRecommendation {
    let name = v.get("chart_type").and_then(Value::as_str).unwrap_or("");
    match ChartType::parse(name) {
        Some(t) => ChartTypeRecommendation::single(t, "requested from the model alongside the data", 5.0),
        None => {
            warn!("unusable chart type {name:?}, falling back to bar");
            ChartTypeRecommendation::single(ChartType::Bar, "fallback", 0.0)
        }
    }
}

/// One prompt over `content` returning chart data and a chart type.
pub fn single_step_on(
    intent: &str,
    content: &str,
    session: Session<'_>,
    config: &BaselineConfig,
) -> Result<(ChartData, ChartTypeRecommendation), BaselineError> {
    if content.trim().is_empty() {
        return Err(BaselineError::EmptyContent);
    }
    let chars = content.chars().count();
    if chars > config.max_context_chars {
        return Err(BaselineError::ContextOverflow { chars, budget: config.max_context_chars });
    }
    let mut prompt = session.prompt(
        RoleTag::SingleStep,
        &slots([("intent", intent), ("content", content), ("output_format", CHART_SCHEMA)]),
    )?;
    let mut last_error = String::new();
    const ATTEMPTS: usize = 2;
    for attempt in 0..ATTEMPTS {
        if attempt > 0 {
            prompt.text.push_str(FORMAT_REMINDER);
        }
        let text = session.send(&prompt)?;
        let parsed = parse_json_payload(&text).map_err(|e| e.to_string()).and_then(|v| {
            let chart = v.get("chart_data").ok_or_else(|| "chart_data missing".to_string())?;
            let data = chart_from_value(chart).map_err(|e| format!("{}: {e}", e.category()))?;
            Ok((data, naive_chart_type(&v)))
        });
        match parsed {
            Ok(pair) => return Ok(pair),
            Err(e) => {
                warn!(attempt, "single-step response rejected: {e}");
                last_error = e;
            }
        }
    }
    Err(BaselineError::GenerationFailed { attempts: ATTEMPTS, last_error })
}

pub fn single_step_generate(
    intent: &str,
    doc: &Document,
    session: Session<'_>,
    config: &BaselineConfig,
) -> Result<(ChartData, ChartTypeRecommendation), BaselineError> {
    single_step_on(intent, &render_context(doc), session, config)
}

fn joined(segments: &[Segment], picks: &[usize]) -> String {
    picks.iter().map(|&i| segments[i].text.as_str()).collect::<Vec<_>>().join("\n\n")
}

/// Union of per-sub-query retrievals, in document order.
pub fn retrieve_with_subqueries(
    subqueries: &[SubQuery],
    segments: &[Segment],
    session: Session<'_>,
) -> Result<Vec<usize>, BaselineError> {
    let mut union = BTreeSet::new();
    let mut last_err = None;
    for q in subqueries {
        match llm_retrieve(&format!("{} {}", q.concept, q.attribute), segments, session) {
            Ok(picks) => union.extend(picks),
            Err(e) => {
                warn!("retrieval for {q} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    if union.is_empty() {
        return Err(last_err.unwrap_or(BaselineError::NoSelection));
    }
    Ok(union.into_iter().collect())
}

pub fn run_baseline(
    method: BaselineMethod,
    intent: &str,
    doc: &Document,
    session: Session<'_>,
    config: &BaselineConfig,
) -> Result<BaselineOutput, BaselineError> {
    if method == BaselineMethod::SingleStep {
        let (data, recommendation) = single_step_generate(intent, doc, session, config)?;
        return Ok(BaselineOutput { data, recommendation, retrieved: None });
    }
    if doc.blocks.iter().all(|b| b.kind != BlockKind::Table && b.text.trim().is_empty()) {
        return Err(BaselineError::EmptyContent);
    }
    let segments = segment_by_headings(doc);
    let picks = match method {
        BaselineMethod::EmbedRetrieval => {
            let mut picks: Vec<usize> =
                embed_retrieve(intent, &segments, config.k, &TfidfEmbedder).iter().map(|s| s.index).collect();
            picks.sort_unstable();
            picks
        }
        BaselineMethod::LlmRetrieval => llm_retrieve(intent, &segments, session)?,
        BaselineMethod::LlmRetrievalQd => {
            let qs = decompose_query(intent, session)?;
            retrieve_with_subqueries(&qs, &segments, session)?
        }
        BaselineMethod::SingleStep => unreachable!(),
    };
    let (data, recommendation) = single_step_on(intent, &joined(&segments, &picks), session, config)?;
    Ok(BaselineOutput { data, recommendation, retrieved: Some(picks) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_document, SourceFormat};
    use crate::llm::{Gateway, ProviderConfig, Script, ScriptEntry, ScriptedProvider};
    use serde_json::json;

    fn md(s: &str) -> Document {
        parse_document(s.as_bytes(), SourceFormat::Markdown).unwrap()
    }

    #[test]
    fn segments_follow_heading_levels() {
        let doc = md("intro\n\n# A\n\na\n\n## B\n\nb\n\n### C\n\nc\n\n## D\n\nd\n");
        let segs = segment_by_headings(&doc);
        let paths: Vec<Vec<String>> = segs.iter().map(|s| s.heading_path.clone()).collect();
        assert_eq!(
            paths,
            vec![
                vec![],
                vec!["A".to_string()],
                vec!["A".into(), "B".into()],
                vec!["A".into(), "B".into(), "C".into()],
                vec!["A".into(), "D".into()]
            ]
        );
        assert_eq!(segs[0].text, "intro");
        assert!(segs[1].text.contains("d"));
        assert_eq!(segs[3].text, "### C\n\nc");
        assert!(!segs[2].text.contains("## D"));
        assert_eq!(segment_by_headings(&md("just text\n")).len(), 1);
    }

    #[test]
    fn tfidf_ranking() {
        let doc = md("# Weather\n\nrain and wind\n\n# Revenue\n\nhotel revenue by year\n\n# Staff\n\nemployees\n");
        let segs = segment_by_headings(&doc);
        let top = embed_retrieve("hotel revenue", &segs, 1, &TfidfEmbedder);
        assert_eq!(top[0].heading_path, vec!["Revenue".to_string()]);
        assert_eq!(embed_retrieve("x", &segs, 50, &TfidfEmbedder).len(), 3);
        let twins = segment_by_headings(&md("# A\n\nsame words\n\n# A\n\nsame words\n"));
        assert_eq!(
            embed_retrieve("same words", &twins, 2, &TfidfEmbedder).iter().map(|s| s.index).collect::<Vec<_>>(),
            [0, 1]
        );
    }

    #[test]
    fn subquery_parsing() {
        let qs =
            parse_subqueries("<sub_c>hotels:revenue</sub_c>\n<sub_c>justtext</sub_c>\n<sub_c>revenue:trend</sub_c>");
        assert_eq!(
            qs,
            vec![
                SubQuery { concept: "hotels".into(), attribute: "revenue".into() },
                SubQuery { concept: "revenue".into(), attribute: "trend".into() }
            ]
        );
        assert!(parse_subqueries("nothing here").is_empty());
    }

    fn scripted(entries: Vec<ScriptEntry>) -> Gateway {
        let script = Script { fallback: None, entries };
        Gateway::new(Box::new(ScriptedProvider::new(script)), ProviderConfig::rule_based()).unwrap()
    }

    #[test]
    fn llm_retrieve_selection() {
        let doc = md("# A\n\na\n\n# B\n\nb\n\n# C\n\nc\n\n# D\n\nd\n\n# E\n\ne\n");
        let segs = segment_by_headings(&doc);
        let gw =
            scripted(vec![ScriptEntry::new(RoleTag::Retrieve, None, vec![json!({"selected_segments": [5, 2, 9]})])]);
        assert_eq!(llm_retrieve("x", &segs, Session::new(&gw, None)).unwrap(), [1, 4]);
        let gw = scripted(vec![ScriptEntry::new(RoleTag::Retrieve, None, vec![json!({"selected_segments": []})])]);
        assert_eq!(llm_retrieve("x", &segs, Session::new(&gw, None)), Err(BaselineError::NoSelection));
    }

    #[test]
    fn single_step_budget_and_types() {
        let doc = md("| Year | Sales |\n| --- | --- |\n| 2021 | 4 |\n| 2022 | 5 |\n");
        let gw = scripted(vec![ScriptEntry::new(
            RoleTag::SingleStep,
            None,
            vec![
                json!({"chart_data": {"values": [{"x": "2021", "y": 4}], "x_axis_label": "Year", "y_axis_label": "Sales", "title": "t"}, "chart_type": "Line"}),
            ],
        )]);
        let (data, rec) =
            single_step_generate("sales", &doc, Session::new(&gw, None), &BaselineConfig::default()).unwrap();
        assert_eq!(data.values.len(), 1);
        assert_eq!(rec.top(), ChartType::Line);
        let tight = BaselineConfig { max_context_chars: 10, ..Default::default() };
        let err = single_step_generate("sales", &doc, Session::new(&gw, None), &tight).unwrap_err();
        assert!(matches!(err, BaselineError::ContextOverflow { budget: 10, .. }));
        assert!(err.to_string().contains("10 characters"));
    }

    #[test]
    fn method_names() {
        for m in BaselineMethod::ALL {
            assert_eq!(m.as_str().parse::<BaselineMethod>().unwrap(), m);
        }
    }
}
