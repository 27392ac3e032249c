//! Chart-type recommendation: a deterministic rule engine, an LLM pass guided
//! by the same rules, and the merge between them.

mod heuristic;
mod profile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::chart::ChartData;
use crate::llm::prompts::slots;
use crate::llm::{parse_json_payload, LlmError, RoleTag, Session};

pub use heuristic::{recommend_heuristic, MAX_PIE_SEGMENTS};
pub use profile::{classify_intent, parse_temporal, profile_data, TemporalValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypingError {
    #[error("unknown chart type {0:?}")]
    UnknownChartType(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("malformed chart-type response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    GroupedBar,
    StackedBar,
    Line,
    Pie,
    Scatter,
    Area,
}

impl ChartType {
    pub const ALL: [ChartType; 7] = [
        ChartType::Bar,
        ChartType::GroupedBar,
        ChartType::StackedBar,
        ChartType::Line,
        ChartType::Pie,
        ChartType::Scatter,
        ChartType::Area,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::GroupedBar => "grouped_bar",
            ChartType::StackedBar => "stacked_bar",
            ChartType::Line => "line",
            ChartType::Pie => "pie",
            ChartType::Scatter => "scatter",
            ChartType::Area => "area",
        }
    }

    /// Canonical name or a common alias ("Column chart", "donut", "Stacked Bar Chart").
    pub fn parse(name: &str) -> Option<ChartType> {
        let mut key: String =
            name.trim().to_ascii_lowercase().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' }).collect();
        key = key.split_whitespace().collect::<Vec<_>>().join(" ");
        for suffix in [" charts", " chart", " graph", " plot", " diagram"] {
            if let Some(stripped) = key.strip_suffix(suffix) {
                key = stripped.to_string();
                break;
            }
        }
        let t = match key.as_str() {
            "bar" | "bars" | "column" | "columns" | "vertical bar" | "horizontal bar" | "simple bar" | "histogram" => {
                ChartType::Bar
            }
            "grouped bar" | "grouped column" | "clustered bar" | "clustered column" | "multi bar"
            | "side by side bar" | "grouped" => ChartType::GroupedBar,
            "stacked bar" | "stacked column" | "stacked" | "100 stacked bar" | "percent stacked bar" => {
                ChartType::StackedBar
            }
            "line" | "lines" | "multi line" | "time series" | "trend line" => ChartType::Line,
            "pie" | "donut" | "doughnut" | "ring" => ChartType::Pie,
            "scatter" | "scatterplot" | "bubble" | "xy" | "dot" => ChartType::Scatter,
            "area" | "stacked area" | "filled line" => ChartType::Area,
            _ => return None,
        };
        Some(t)
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChartType {
    type Err = TypingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChartType::parse(s).ok_or_else(|| TypingError::UnknownChartType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XKind {
    Temporal,
    Categorical,
    Numeric,
}

impl XKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            XKind::Temporal => "temporal",
            XKind::Categorical => "categorical",
            XKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentClass {
    Magnitude,
    Trend,
    Composition,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataProfile {
    pub x_kind: XKind,
    /// Distinct x values.
    pub point_count: usize,
    pub category_count: usize,
    pub is_proportional: bool,
    /// Constant step between sorted temporal x values; always true otherwise.
    pub regular_spacing: bool,
}

impl DataProfile {
    /// Slices a pie or a single stacked column would show.
    pub fn segments(&self) -> usize {
        if self.category_count <= 1 {
            self.point_count
        } else {
            self.category_count
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedType {
    pub chart_type: ChartType,
    pub justification: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTypeRecommendation {
    pub ranked: Vec<RankedType>,
}

impl ChartTypeRecommendation {
    pub fn top(&self) -> ChartType {
        self.ranked[0].chart_type
    }

    pub fn types(&self) -> Vec<ChartType> {
        self.ranked.iter().map(|r| r.chart_type).collect()
    }

    pub fn single(chart_type: ChartType, justification: impl Into<String>, confidence: f64) -> Self {
        Self { ranked: vec![RankedType { chart_type, justification: justification.into(), confidence }] }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypingMode {
    HeuristicOnly,
    #[default]
    LlmGuided,
}

/// Ask the model for one chart type.
pub fn recommend_llm(
    intent: &str,
    data: &ChartData,
    session: Session<'_>,
) -> Result<ChartTypeRecommendation, TypingError> {
    let json = data.to_canonical_json();
    let text = session.call(RoleTag::ChartType, &slots([("intent", intent), ("data", &json)]))?;
    let v = parse_json_payload(&text)?;
    parse_type_response(&v)
}

pub fn parse_type_response(v: &Value) -> Result<ChartTypeRecommendation, TypingError> {
    let name = v
        .get("recommended_chart_type")
        .and_then(Value::as_str)
        .ok_or_else(|| TypingError::Malformed("recommended_chart_type missing".into()))?;
    let chart_type = name.parse::<ChartType>()?;
    let justification = v.get("justification").and_then(Value::as_str).unwrap_or("").to_string();
    let confidence = match v.get("confidence_score") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => crate::chart::normalize_number(s),
        _ => None,
    }
    .unwrap_or(0.0)
    .clamp(0.0, 10.0);
    Ok(ChartTypeRecommendation::single(chart_type, justification, confidence))
}

/// Merge an LLM pick into the heuristic ranking.
///
/// An LLM pick that the rules also rank goes first; anything else stays behind
/// the rules' first choice. Depth is capped at 3 and confidences are made
/// non-increasing.
pub fn merge(heuristic: &ChartTypeRecommendation, llm: &ChartTypeRecommendation) -> ChartTypeRecommendation {
    let pick = &llm.ranked[0];
    let mut ranked: Vec<RankedType> = Vec::new();
    let in_rules = heuristic.ranked.iter().any(|r| r.chart_type == pick.chart_type);
    if in_rules {
        ranked.push(pick.clone());
        ranked.extend(heuristic.ranked.iter().filter(|r| r.chart_type != pick.chart_type).cloned());
    } else {
        ranked.push(heuristic.ranked[0].clone());
        ranked.push(pick.clone());
        ranked.extend(heuristic.ranked.iter().skip(1).cloned());
    }
    ranked.truncate(3);
    for i in 1..ranked.len() {
        if ranked[i].confidence > ranked[i - 1].confidence {
            ranked[i].confidence = ranked[i - 1].confidence;
        }
    }
    ChartTypeRecommendation { ranked }
}

pub fn recommend(intent: &str, data: &ChartData, session: Session<'_>, mode: TypingMode) -> ChartTypeRecommendation {
    let heuristic = recommend_heuristic(&profile_data(data), classify_intent(intent));
    if mode == TypingMode::HeuristicOnly {
        return heuristic;
    }
    match recommend_llm(intent, data, session) {
        Ok(llm) => merge(&heuristic, &llm),
        Err(e) => {
            warn!("chart-type model call failed, using heuristics: {e}");
            heuristic
        }
    }
}
