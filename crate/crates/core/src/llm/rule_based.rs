//! Deterministic stand-in for a model.
//!
//! - extract: pick the table whose caption and header share the most keywords
//!   with the intent and convert up to its first 10 rows (all rows once
//!   feedback is present)
//! - validate: reject non-numeric y values, request re-extraction when rows of
//!   the matching table are missing, suggest corrections for mismatched values
//! - refine: apply corrections field by field
//! - chart_type: the heuristic rule engine
//! - single_step: the extraction rule plus a fixed `bar` chart type
//! - retrieve / decompose: keyword overlap

use std::collections::{BTreeMap, HashSet};

use regex::Regex;
use serde_json::{json, Value};

use super::{LlmError, Prompt, Provider, ProviderConfig, RoleTag};
use crate::chart::{self, normalize_number, ChartData, DataPoint};
use crate::extract::{apply_corrections, Correction};
use crate::ingest::{extract_tables, parse_document, SourceFormat, Table};
use crate::text;
use crate::typing::{classify_intent, profile_data, recommend_heuristic};

/// Row cap of a first extraction attempt.
pub const FIRST_PASS_ROWS: usize = 10;

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedProvider;

impl RuleBasedProvider {
    pub fn new() -> Self {
        Self
    }
}

impl Provider for RuleBasedProvider {
    fn generate(&self, prompt: &Prompt, _config: &ProviderConfig) -> Result<String, LlmError> {
        let slot = |name: &str| {
            prompt
                .slot(name)
                .ok_or_else(|| LlmError::ProviderRefusal(format!("rule-based provider needs the `{name}` slot")))
        };
        match prompt.role_tag {
            RoleTag::Extract => {
                let feedback = prompt.slot("optional_feedback_section").unwrap_or("").trim();
                let cap = if feedback.is_empty() { Some(FIRST_PASS_ROWS) } else { None };
                Ok(extract(slot("intent")?, slot("content")?, cap))
            }
            RoleTag::Validate => Ok(validate(slot("intent")?, slot("content")?, slot("extracted_data")?)),
            RoleTag::Refine => refine(slot("extracted_data")?, slot("suggested_corrections")?),
            RoleTag::ChartType => chart_type(slot("intent")?, slot("data")?),
            RoleTag::SingleStep => Ok(single_step(slot("intent")?, slot("content")?)),
            RoleTag::Retrieve => Ok(retrieve(slot("intent")?, slot("segments")?)),
            RoleTag::Decompose => Ok(decompose(slot("intent")?)),
        }
    }
}

fn content_tables(content: &str) -> Vec<Table> {
    parse_document(content.as_bytes(), SourceFormat::Markdown).map(|doc| extract_tables(&doc)).unwrap_or_default()
}

fn extract(intent: &str, content: &str, cap: Option<usize>) -> String {
    let tables = content_tables(content);
    match select_table(&tables, intent).and_then(|t| table_to_chart(t, intent, cap)) {
        Some(data) => data.to_canonical_json(),
        None => "I could not find tabular data matching the intent in the provided content.".to_string(),
    }
}

fn single_step(intent: &str, content: &str) -> String {
    let tables = content_tables(content);
    match select_table(&tables, intent).and_then(|t| table_to_chart(t, intent, Some(FIRST_PASS_ROWS))) {
        Some(data) => {
            let chart: Value = serde_json::from_str(&data.to_canonical_json()).expect("canonical JSON");
            json!({"chart_data": chart, "chart_type": "bar"}).to_string()
        }
        None => "I could not find tabular data matching the intent in the document.".to_string(),
    }
}

/// The table sharing the most intent keywords in caption and header; ties go
/// to the earliest. Tables without a numeric value column are skipped.
pub fn select_table<'a>(tables: &'a [Table], intent: &str) -> Option<&'a Table> {
    let intent_keys = text::keyword_set(intent);
    let mut best: Option<(&Table, usize)> = None;
    for table in tables.iter().filter(|t| !numeric_columns(t).is_empty()) {
        let mut described = table.caption.clone().unwrap_or_default();
        for cell in &table.header {
            described.push(' ');
            described.push_str(cell);
        }
        let score = text::keyword_set(&described).intersection(&intent_keys).count();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((table, score));
        }
    }
    best.map(|(t, _)| t)
}

fn is_missing_marker(cell: &str) -> bool {
    matches!(cell.trim(), "" | "-" | "\u{2014}" | "\u{2013}" | "n/a" | "N/A" | "na" | "NA" | "n.a.")
}

/// Columns after the label column whose non-empty cells are mostly numbers.
fn numeric_columns(table: &Table) -> Vec<usize> {
    (1..table.width())
        .filter(|&j| {
            let cells: Vec<&str> = table.rows.iter().map(|r| r[j].as_str()).filter(|c| !is_missing_marker(c)).collect();
            let numeric = cells.iter().filter(|c| normalize_number(c).is_some()).count();
            numeric > 0 && numeric * 2 >= cells.len()
        })
        .collect()
}

fn year_of(header: &str) -> Option<u32> {
    static_year_regex().captures(header.trim()).and_then(|c| c[1].parse().ok())
}

fn static_year_regex() -> &'static Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:FY\s*)?((?:19|20)\d{2})$").expect("valid regex"))
}

/// Value columns the intent asks for: those whose header shares a keyword with
/// the intent (a span of matched years is filled in), else all of them.
fn intent_columns(table: &Table, intent: &str, numeric: &[usize]) -> Vec<usize> {
    let intent_keys = text::keyword_set(intent);
    let matched: Vec<usize> = numeric
        .iter()
        .copied()
        .filter(|&j| text::keyword_set(&table.header[j]).intersection(&intent_keys).next().is_some())
        .collect();
    if matched.is_empty() {
        return numeric.to_vec();
    }
    let years: Vec<u32> = matched.iter().filter_map(|&j| year_of(&table.header[j])).collect();
    if years.len() >= 2 {
        let (lo, hi) = (*years.iter().min().unwrap(), *years.iter().max().unwrap());
        return numeric
            .iter()
            .copied()
            .filter(|&j| matched.contains(&j) || year_of(&table.header[j]).is_some_and(|y| (lo..=hi).contains(&y)))
            .collect();
    }
    matched
}

/// Convert a table into chart data for `intent`, reading at most `max_rows`
/// body rows. The first column holds row labels.
pub fn table_to_chart(table: &Table, intent: &str, max_rows: Option<usize>) -> Option<ChartData> {
    let numeric = numeric_columns(table);
    if numeric.is_empty() {
        return None;
    }
    let columns = intent_columns(table, intent, &numeric);
    let rows: Vec<&Vec<String>> = table
        .rows
        .iter()
        .filter(|r| !r[0].trim().is_empty() && columns.iter().any(|&j| normalize_number(&r[j]).is_some()))
        .take(max_rows.unwrap_or(usize::MAX))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let label_header = table.header[0].trim();
    let caption = table.caption.clone();
    let by_year = columns.len() > 1 && columns.iter().all(|&j| year_of(&table.header[j]).is_some());

    let mut points = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |point: DataPoint| {
        let key = (point.x.key(), point.category.clone());
        if seen.insert(key) {
            points.push(point);
        }
    };
    let (x_label, y_label);
    if columns.len() == 1 {
        let j = columns[0];
        for row in &rows {
            if let Some(y) = normalize_number(&row[j]) {
                push(DataPoint::new(row[0].trim(), y));
            }
        }
        x_label = if label_header.is_empty() { "Category".to_string() } else { label_header.to_string() };
        y_label = table.header[j].trim().to_string();
    } else if by_year && rows.len() == 1 {
        for &j in &columns {
            if let Some(y) = normalize_number(&rows[0][j]) {
                push(DataPoint::new(table.header[j].trim(), y));
            }
        }
        x_label = "Year".to_string();
        y_label = rows[0][0].trim().to_string();
    } else if by_year {
        for row in &rows {
            for &j in &columns {
                if let Some(y) = normalize_number(&row[j]) {
                    push(DataPoint::new(table.header[j].trim(), y).with_category(row[0].trim()));
                }
            }
        }
        x_label = "Year".to_string();
        y_label = caption.clone().unwrap_or_else(|| "Value".to_string());
    } else {
        for row in &rows {
            for &j in &columns {
                if let Some(y) = normalize_number(&row[j]) {
                    let series = table.header[j].trim();
                    let series = if series.is_empty() { "Value" } else { series };
                    push(DataPoint::new(row[0].trim(), y).with_category(series));
                }
            }
        }
        x_label = if label_header.is_empty() { "Category".to_string() } else { label_header.to_string() };
        y_label = caption.clone().unwrap_or_else(|| "Value".to_string());
    }
    let title = caption.unwrap_or_else(|| intent.trim().to_string());
    ChartData::new(points, x_label, y_label, title).ok()
}

fn point_key(p: &DataPoint) -> (String, Option<String>) {
    (p.x.key(), p.category.clone())
}

fn validate(intent: &str, content: &str, extracted: &str) -> String {
    let report = |needs: bool, feedback: &str, corrections: Vec<Value>, confidence: u32| {
        json!({
            "needs_re_extraction": needs,
            "feedback_for_re_extraction": feedback,
            "suggested_corrections_for_refinement": corrections,
            "confidence_score": confidence,
        })
        .to_string()
    };
    let raw: Value = match super::parse_json_payload(extracted) {
        Ok(v) => v,
        Err(_) => return report(true, "The extracted data is not a JSON object.", vec![], 1),
    };
    if let Some(values) = raw.get("values").and_then(Value::as_array) {
        let bad: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, p)| match p.get("y") {
                Some(Value::Number(_)) => false,
                Some(Value::String(s)) => normalize_number(s).is_none(),
                _ => true,
            })
            .map(|(i, _)| format!("values[{i}].y"))
            .collect();
        if !bad.is_empty() {
            return report(true, &format!("Non-numeric y values at {}.", bad.join(", ")), vec![], 2);
        }
    }
    let data = match chart::chart_from_value(&raw) {
        Ok(d) => d,
        Err(e) => return report(true, &format!("The extracted data violates the schema: {e}."), vec![], 2),
    };
    let tables = content_tables(content);
    let Some(expected) = select_table(&tables, intent).and_then(|t| table_to_chart(t, intent, None)) else {
        return report(false, "", vec![], 5);
    };

    let extracted_keys: HashSet<_> = data.values.iter().map(point_key).collect();
    let mut missing_rows: Vec<String> = Vec::new();
    for p in &expected.values {
        if !extracted_keys.contains(&point_key(p)) {
            let row = match (&p.category, expected.x_axis_label == "Year") {
                (Some(c), true) => c.clone(),
                _ => p.x.to_string(),
            };
            if !missing_rows.contains(&row) {
                missing_rows.push(row);
            }
        }
    }
    if !missing_rows.is_empty() {
        let feedback = format!("Missing rows from the source table: {}.", missing_rows.join(", "));
        return report(true, &feedback, vec![], 3);
    }

    let expected_y: BTreeMap<_, f64> = expected.values.iter().map(|p| (point_key(p), p.y)).collect();
    let corrections: Vec<Value> = data
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let want = *expected_y.get(&point_key(p))?;
            (!chart::numbers_match(want, p.y)).then(|| {
                json!({
                    "field_path": format!("values[{i}].y"),
                    "suggestion": "Use the value reported in the source table",
                    "suggested_value": chart::format_number(want),
                })
            })
        })
        .collect();
    let confidence = if corrections.is_empty() { 9 } else { 7 };
    report(false, "", corrections, confidence)
}

fn refine(extracted: &str, corrections: &str) -> Result<String, LlmError> {
    let data = chart::parse_chart_data(extracted)
        .map_err(|e| LlmError::ProviderRefusal(format!("cannot refine invalid data: {e}")))?;
    let corrections: Vec<Correction> = serde_json::from_str(corrections)
        .map_err(|e| LlmError::ProviderRefusal(format!("cannot read corrections: {e}")))?;
    let (refined, summary) = apply_corrections(&data, &corrections);
    let refined: Value = serde_json::from_str(&refined.to_canonical_json()).expect("canonical JSON");
    Ok(json!({
        "refined_data": refined,
        "refinement_summary": {
            "changes_applied_count": summary.changes_applied_count,
            "issues_applying_corrections": summary.issues_applying_corrections,
        }
    })
    .to_string())
}

fn chart_type(intent: &str, data: &str) -> Result<String, LlmError> {
    let data = chart::parse_chart_data(data)
        .map_err(|e| LlmError::ProviderRefusal(format!("cannot type invalid data: {e}")))?;
    let class = classify_intent(intent);
    let top = recommend_heuristic(&profile_data(&data), class).ranked.remove(0);
    Ok(json!({
        "recommended_chart_type": top.chart_type.as_str(),
        "justification": top.justification,
        "confidence_score": top.confidence,
    })
    .to_string())
}

/// Segments come as `--- Segment N ---` headed blocks.
fn retrieve(intent: &str, segments: &str) -> String {
    let marker = Regex::new(r"(?m)^--- Segment (\d+) ---$").expect("valid regex");
    let heads: Vec<(usize, usize, usize)> = marker
        .captures_iter(segments)
        .filter_map(|c| {
            let m = c.get(0)?;
            Some((c[1].parse().ok()?, m.start(), m.end()))
        })
        .collect();
    let mut scored: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(k, &(number, _, body_start))| {
            let body_end = heads.get(k + 1).map_or(segments.len(), |h| h.1);
            (number, text::overlap(intent, &segments[body_start..body_end]))
        })
        .filter(|&(_, score)| score > 0)
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = scored.iter().take(2).map(|&(n, _)| n).collect();
    picked.sort_unstable();
    json!({ "selected_segments": picked }).to_string()
}

fn decompose(intent: &str) -> String {
    let mut keys: Vec<String> = Vec::new();
    for k in text::keywords(intent) {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    match keys.len() {
        0 => "The intent does not name any concept to look up.".to_string(),
        1 => format!("<sub_c>{}:value</sub_c>", keys[0]),
        _ => {
            keys.windows(2).take(3).map(|w| format!("<sub_c>{}:{}</sub_c>", w[0], w[1])).collect::<Vec<_>>().join("\n")
        }
    }
}
