//! Extract, validate, then re-extract with feedback, refine or accept.

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::chart::{apply_field_path, chart_from_value, ChartData, ChartError, Scalar};
use crate::ingest::{render_context, Document};
use crate::llm::prompts::slots;
use crate::llm::{parse_json_payload, LlmError, RoleTag, Session, CHART_SCHEMA};

/// Appended to a prompt whose response could not be parsed.
pub const FORMAT_REMINDER: &str =
    "\n\nReminder: respond with only a JSON object that follows the schema above, with no other text.";

/// Feedback used when re-extraction is forced by the confidence threshold and
/// the report carries none of its own.
pub const LOW_CONFIDENCE_FEEDBACK: &str =
    "Validation confidence was below the acceptance threshold; re-check the data against the content.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("content is empty")]
    EmptyContent,
    #[error("extraction failed after {attempts} attempt(s): {last_error}")]
    ExtractionFailed { attempts: usize, last_error: String },
    #[error("refinement rejected: {0}")]
    RefinementRejected(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub field_path: String,
    #[serde(default)]
    pub suggestion: String,
    #[serde(default, deserialize_with = "optional_scalar", skip_serializing_if = "Option::is_none")]
    pub suggested_value: Option<Scalar>,
}

fn optional_scalar<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Scalar>, D::Error> {
    let value = Value::deserialize(d)?;
    Ok(match value {
        Value::Null => None,
        Value::String(s) if s.trim().is_empty() => None,
        Value::Bool(b) => Some(Scalar::Text(b.to_string())),
        other => Scalar::from_json(&other),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub needs_re_extraction: bool,
    pub feedback_for_re_extraction: String,
    pub suggested_corrections: Vec<Correction>,
    pub confidence_score: f64,
}

impl ValidationReport {
    /// Report used when the validator's answer is unusable.
    pub fn degraded() -> Self {
        Self {
            needs_re_extraction: false,
            feedback_for_re_extraction: String::new(),
            suggested_corrections: Vec::new(),
            confidence_score: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub changes_applied_count: usize,
    pub issues_applying_corrections: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ReExtract,
    Refine,
    Accept,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    #[default]
    Local,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_iterations: usize,
    /// Reports scoring below this are treated as requesting re-extraction.
    pub confidence_accept_threshold: f64,
    pub refine_mode: RefineMode,
    /// Extra attempts with a format reminder when a response fails to parse.
    pub schema_retries: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { max_iterations: 3, confidence_accept_threshold: 0.0, refine_mode: RefineMode::Local, schema_retries: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub attempt_index: usize,
    pub chart_data: ChartData,
    pub report: ValidationReport,
    pub action: Action,
}

/// Logical step counts of one loop run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    /// Extraction attempts that produced valid chart data.
    pub extractions: usize,
    /// Extraction attempts whose every response failed to parse.
    pub failed_extractions: usize,
    pub validations: usize,
    pub refinements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub iterations: Vec<Iteration>,
    pub final_data: ChartData,
    /// Requests sent to the gateway, schema retries included.
    pub total_llm_calls: usize,
    pub steps: StepCounts,
    /// The attempt whose data was accepted.
    pub selected_attempt: usize,
    /// Validation never passed and the best-scoring attempt was taken.
    pub degraded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
}

impl LoopTrace {
    pub fn actions(&self) -> Vec<Action> {
        self.iterations.iter().map(|i| i.action).collect()
    }
}

struct Calls<'a> {
    session: Session<'a>,
    count: usize,
}

impl Calls<'_> {
    fn send(&mut self, prompt: &crate::llm::Prompt) -> Result<String, LlmError> {
        self.count += 1;
        self.session.send(prompt)
    }
}

fn extract_slots(intent: &str, content: &str, feedback: Option<&str>) -> std::collections::BTreeMap<String, String> {
    slots([
        ("intent", intent),
        ("content", content),
        ("optional_feedback_section", feedback.unwrap_or("")),
        ("output_format", CHART_SCHEMA),
    ])
}

/// Render the extraction prompt, call the model and parse chart data,
/// retrying with a format reminder when the response does not parse.
pub fn extract_once(
    intent: &str,
    content: &str,
    feedback: Option<&str>,
    session: Session<'_>,
) -> Result<ChartData, ExtractError> {
    let mut calls = Calls { session, count: 0 };
    extract_counted(intent, content, feedback, &mut calls, LoopConfig::default().schema_retries)
}

fn extract_counted(
    intent: &str,
    content: &str,
    feedback: Option<&str>,
    calls: &mut Calls<'_>,
    schema_retries: usize,
) -> Result<ChartData, ExtractError> {
    if content.trim().is_empty() {
        return Err(ExtractError::EmptyContent);
    }
    let mut prompt = calls.session.prompt(RoleTag::Extract, &extract_slots(intent, content, feedback))?;
    let mut last_error = String::new();
    for attempt in 0..=schema_retries {
        if attempt > 0 {
            prompt.text.push_str(FORMAT_REMINDER);
        }
        let text = calls.send(&prompt)?;
        match parse_json_payload(&text)
            .map_err(|e| e.to_string())
            .and_then(|v| chart_from_value(&v).map_err(|e: ChartError| format!("{}: {e}", e.category())))
        {
            Ok(data) => return Ok(data),
            Err(e) => {
                warn!(attempt, "extraction response rejected: {e}");
                last_error = e;
            }
        }
    }
    Err(ExtractError::ExtractionFailed { attempts: schema_retries + 1, last_error })
}

/// Ask the validator about `data`. Unusable answers degrade to an empty,
/// zero-confidence approval.
pub fn validate_data(intent: &str, content: &str, data: &ChartData, session: Session<'_>) -> ValidationReport {
    let mut calls = Calls { session, count: 0 };
    validate_counted(intent, content, data, &mut calls, LoopConfig::default().schema_retries)
}

fn validate_counted(
    intent: &str,
    content: &str,
    data: &ChartData,
    calls: &mut Calls<'_>,
    schema_retries: usize,
) -> ValidationReport {
    let json = data.to_canonical_json();
    let slot_map =
        slots([("intent", intent), ("content", content), ("extracted_data", &json), ("output_format", CHART_SCHEMA)]);
    let mut prompt = match calls.session.prompt(RoleTag::Validate, &slot_map) {
        Ok(p) => p,
        Err(e) => {
            warn!("validation prompt failed: {e}");
            return ValidationReport::degraded();
        }
    };
    for attempt in 0..=schema_retries {
        if attempt > 0 {
            prompt.text.push_str(FORMAT_REMINDER);
        }
        let parsed = calls
            .send(&prompt)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_json_payload(&text).map_err(|e| e.to_string()))
            .and_then(|v| parse_report(&v));
        match parsed {
            Ok(report) => return report,
            Err(e) => warn!(attempt, "validation response rejected: {e}"),
        }
    }
    warn!("validation degraded to a zero-confidence approval");
    ValidationReport::degraded()
}

fn loose_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Parse a validator response, accepting stringly-typed booleans and scores.
pub fn parse_report(v: &Value) -> Result<ValidationReport, String> {
    if !v.is_object() {
        return Err("report is not an object".into());
    }
    let needs = match v.get("needs_re_extraction") {
        Some(flag) => loose_bool(flag).ok_or("needs_re_extraction is not a boolean")?,
        None => return Err("needs_re_extraction missing".into()),
    };
    let mut feedback = v.get("feedback_for_re_extraction").and_then(Value::as_str).unwrap_or("").trim().to_string();
    if needs && feedback.is_empty() {
        feedback = "Re-extract the data; the validator reported critical omissions without details.".into();
    }
    let mut corrections = Vec::new();
    if let Some(list) = v.get("suggested_corrections_for_refinement").and_then(Value::as_array) {
        for item in list {
            match serde_json::from_value::<Correction>(item.clone()) {
                Ok(c) if crate::chart::FieldPath::parse(&c.field_path).is_ok() => corrections.push(c),
                Ok(c) => warn!("dropping correction with unparseable path {:?}", c.field_path),
                Err(e) => warn!("dropping malformed correction: {e}"),
            }
        }
    }
    let raw_conf = match v.get("confidence_score") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => crate::chart::normalize_number(s),
        _ => None,
    }
    .unwrap_or(0.0);
    let confidence_score = raw_conf.clamp(0.0, 10.0);
    if confidence_score != raw_conf {
        warn!("confidence_score {raw_conf} clamped to {confidence_score}");
    }
    Ok(ValidationReport {
        needs_re_extraction: needs,
        feedback_for_re_extraction: feedback,
        suggested_corrections: corrections,
        confidence_score,
    })
}

/// Apply corrections one at a time, skipping (and recording) those that fail.
pub fn apply_corrections(data: &ChartData, corrections: &[Correction]) -> (ChartData, RefinementSummary) {
    let mut current = data.clone();
    let mut summary = RefinementSummary::default();
    for c in corrections {
        let Some(value) = &c.suggested_value else {
            summary.issues_applying_corrections.push(format!("{}: no suggested_value", c.field_path));
            continue;
        };
        match apply_field_path(&current, &c.field_path, value) {
            Ok(next) => {
                current = next;
                summary.changes_applied_count += 1;
            }
            Err(e) => summary.issues_applying_corrections.push(format!("{}: {e}", c.field_path)),
        }
    }
    (current, summary)
}

pub fn refine_data(
    intent: &str,
    content: &str,
    data: &ChartData,
    corrections: &[Correction],
    session: Session<'_>,
    mode: RefineMode,
) -> Result<(ChartData, RefinementSummary), ExtractError> {
    let mut calls = Calls { session, count: 0 };
    refine_counted(intent, content, data, corrections, &mut calls, mode)
}

fn refine_counted(
    intent: &str,
    content: &str,
    data: &ChartData,
    corrections: &[Correction],
    calls: &mut Calls<'_>,
    mode: RefineMode,
) -> Result<(ChartData, RefinementSummary), ExtractError> {
    if mode == RefineMode::Local {
        return Ok(apply_corrections(data, corrections));
    }
    let json = data.to_canonical_json();
    let corrections_json = serde_json::to_string(corrections).expect("corrections serialize");
    let prompt = calls.session.prompt(
        RoleTag::Refine,
        &slots([
            ("intent", intent),
            ("content", content),
            ("extracted_data", &json),
            ("suggested_corrections", &corrections_json),
            ("output_format", CHART_SCHEMA),
        ]),
    )?;
    let text = calls.send(&prompt)?;
    let v = parse_json_payload(&text).map_err(|e| ExtractError::RefinementRejected(e.to_string()))?;
    let refined = v
        .get("refined_data")
        .ok_or_else(|| ExtractError::RefinementRejected("refined_data missing".into()))
        .and_then(|r| chart_from_value(r).map_err(|e| ExtractError::RefinementRejected(e.to_string())))?;
    if refined.values.len() != data.values.len() {
        return Err(ExtractError::RefinementRejected(format!(
            "point count changed from {} to {}",
            data.values.len(),
            refined.values.len()
        )));
    }
    let summary = v.get("refinement_summary");
    let reported = summary
        .and_then(|s| s.get("changes_applied_count"))
        .and_then(|c| c.as_u64().or_else(|| c.as_str().and_then(|s| s.trim().parse().ok())))
        .unwrap_or(0) as usize;
    let issues = summary
        .and_then(|s| s.get("issues_applying_corrections"))
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|i| i.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    Ok((
        refined,
        RefinementSummary {
            changes_applied_count: reported.min(corrections.len()),
            issues_applying_corrections: issues,
        },
    ))
}

/// Run the loop over the rendered `document`.
pub fn run_extraction_loop(
    intent: &str,
    document: &Document,
    session: Session<'_>,
    config: &LoopConfig,
) -> Result<LoopTrace, ExtractError> {
    run_extraction_loop_on(intent, &render_context(document), session, config)
}

/// Run the loop over an already rendered content string.
pub fn run_extraction_loop_on(
    intent: &str,
    content: &str,
    session: Session<'_>,
    config: &LoopConfig,
) -> Result<LoopTrace, ExtractError> {
    if content.trim().is_empty() {
        return Err(ExtractError::EmptyContent);
    }
    let max = config.max_iterations.max(1);
    let mut calls = Calls { session, count: 0 };
    let mut steps = StepCounts::default();
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut feedback: Option<String> = None;
    let mut last_error = None;

    for attempt in 0..max {
        let data = match extract_counted(intent, content, feedback.as_deref(), &mut calls, config.schema_retries) {
            Ok(d) => d,
            Err(ExtractError::ExtractionFailed { last_error: e, .. }) => {
                steps.failed_extractions += 1;
                feedback = Some(format!("The previous response could not be used: {e}"));
                last_error = Some(e);
                continue;
            }
            Err(other) => return Err(other),
        };
        steps.extractions += 1;
        let report = validate_counted(intent, content, &data, &mut calls, config.schema_retries);
        steps.validations += 1;
        let low_confidence = report.confidence_score < config.confidence_accept_threshold;
        let wants_retry = report.needs_re_extraction || low_confidence;

        if wants_retry && attempt + 1 < max {
            feedback = Some(if report.needs_re_extraction {
                report.feedback_for_re_extraction.clone()
            } else {
                LOW_CONFIDENCE_FEEDBACK.to_string()
            });
            iterations.push(Iteration { attempt_index: attempt, chart_data: data, report, action: Action::ReExtract });
            continue;
        }
        if wants_retry {
            iterations.push(Iteration { attempt_index: attempt, chart_data: data, report, action: Action::Accept });
            break;
        }

        let corrections = report.suggested_corrections.clone();
        if corrections.is_empty() {
            iterations.push(Iteration {
                attempt_index: attempt,
                chart_data: data.clone(),
                report,
                action: Action::Accept,
            });
            return Ok(finish(iterations, data, calls.count, steps, attempt, false, None));
        }
        steps.refinements += 1;
        let (final_data, summary) =
            match refine_counted(intent, content, &data, &corrections, &mut calls, config.refine_mode) {
                Ok(out) => out,
                Err(ExtractError::RefinementRejected(why)) => {
                    warn!("keeping unrefined data: {why}");
                    let summary = RefinementSummary {
                        changes_applied_count: 0,
                        issues_applying_corrections: vec![format!("refinement rejected: {why}")],
                    };
                    (data.clone(), summary)
                }
                Err(other) => return Err(other),
            };
        iterations.push(Iteration { attempt_index: attempt, chart_data: data, report, action: Action::Refine });
        return Ok(finish(iterations, final_data, calls.count, steps, attempt, false, Some(summary)));
    }

    // Attempts exhausted without a passing validation.
    let Some(best) = iterations
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.report.confidence_score.total_cmp(&b.report.confidence_score).then(ia.cmp(ib)))
        .map(|(i, _)| i)
    else {
        return Err(ExtractError::ExtractionFailed {
            attempts: steps.failed_extractions,
            last_error: last_error.unwrap_or_default(),
        });
    };
    if let Some(last) = iterations.last_mut() {
        last.action = Action::Accept;
    }
    let selected = iterations[best].attempt_index;
    let data = iterations[best].chart_data.clone();
    Ok(finish(iterations, data, calls.count, steps, selected, true, None))
}

fn finish(
    iterations: Vec<Iteration>,
    final_data: ChartData,
    total_llm_calls: usize,
    steps: StepCounts,
    selected_attempt: usize,
    degraded: bool,
    refinement: Option<RefinementSummary>,
) -> LoopTrace {
    LoopTrace { iterations, final_data, total_llm_calls, steps, selected_attempt, degraded, refinement }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::DataPoint;
    use serde_json::json;

    #[test]
    fn report_parsing_is_lenient() {
        let r = parse_report(&json!({
            "needs_re_extraction": "false",
            "feedback_for_re_extraction": "",
            "suggested_corrections_for_refinement": [
                {"field_path": "values[0].y", "suggestion": "Convert to number", "suggested_value": "1234"},
                {"field_path": "nonsense", "suggestion": "x"}
            ],
            "confidence_score": "11"
        }))
        .unwrap();
        assert!(!r.needs_re_extraction);
        assert_eq!(r.confidence_score, 10.0);
        assert_eq!(r.suggested_corrections.len(), 1);
        assert_eq!(r.suggested_corrections[0].suggested_value, Some(Scalar::Text("1234".into())));
    }

    #[test]
    fn local_refine() {
        let data = ChartData::new(vec![DataPoint::new("a", 1.0)], "x", "y", "t").unwrap();
        let fix =
            |p: &str| Correction { field_path: p.into(), suggestion: String::new(), suggested_value: Some("5".into()) };
        let (out, summary) = apply_corrections(&data, &[fix("values[0].y")]);
        assert_eq!(out.values[0].y, 5.0);
        assert_eq!(summary.changes_applied_count, 1);
        assert!(summary.issues_applying_corrections.is_empty());
        let (out, summary) = apply_corrections(&data, &[fix("values[3].y")]);
        assert_eq!(out, data);
        assert_eq!(summary.changes_applied_count, 0);
        assert_eq!(summary.issues_applying_corrections.len(), 1);
    }
}
