//! Chart evaluation: ground each generated value in a best-matching span of the
//! reference (a table, or the whole document in reference-free mode), score
//! chart data precision/recall, score chart types, correlate with ratings.

mod heatmap;
mod kadane;
mod process;
mod stats;
mod tokenize;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{chart_to_tuples, normalize_number, numbers_in_text, numbers_match, ChartData, ChartTuple};
use crate::ingest::{render_context, render_table, Document, Table};
use crate::typing::{ChartType, ChartTypeRecommendation};

pub use heatmap::{compute_heatmap, lexical_heatmap, HeatmapMatrix, HeatmapProvider, LexicalProvider};
pub use kadane::{kadane_best_span, Centering, Span};
pub use process::{parse_heatmap_response, Aggregation, JsonLinesProvider, ProcessHeatmapProvider};
pub use stats::pearson_r;
pub use tokenize::{tokenize, tokenized, TokenizedText};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid tokenization: {0}")]
    InvalidTokens(String),
    #[error("heatmap shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("heatmap provider error: {0}")]
    ProviderError(String),
    #[error("no output token overlaps value {0}")]
    ValueTokenNotFound(usize),
    #[error("reference has no numeric cells")]
    NoNumericCells,
    #[error("length mismatch: {0} vs {1} (need equal lengths of at least 2)")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
}

/// Separates the reference from the chart JSON in an attribution prompt.
pub const ATTRIBUTION_SEPARATOR: &str = "<<<CHART OUTPUT>>>";

#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Table(&'a Table),
    /// Reference-free mode: the whole source document.
    Document(&'a Document),
}

impl Reference<'_> {
    pub fn render(&self) -> String {
        match self {
            Reference::Table(t) => render_table(t),
            Reference::Document(d) => render_context(d),
        }
    }
}

pub fn build_attribution_prompt(reference: Reference<'_>, chart_json: &str) -> String {
    format!("{}\n\n{ATTRIBUTION_SEPARATOR}\n\n{chart_json}", reference.render())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub tuple: ChartTuple,
    /// Inclusive document-token range.
    pub span: (usize, usize),
    pub span_text: String,
    pub span_score: f64,
    /// Byte offsets of the span in the reference rendering.
    pub span_offsets: (usize, usize),
    pub grounded: bool,
}

/// Attribute one tuple whose value literal occupies `value_range` (bytes) of
/// the heatmap's output text. Rows of all overlapping output tokens are
/// averaged before the span search.
pub fn attribute_tuple(
    tuple: &ChartTuple,
    value_range: Range<usize>,
    heatmap: &HeatmapMatrix,
    centering: Centering,
) -> Result<AttributionResult, EvalError> {
    let rows: Vec<&Vec<f64>> = heatmap
        .out_tokens
        .char_spans
        .iter()
        .zip(&heatmap.scores)
        .filter(|((s, e), _)| *s < value_range.end && *e > value_range.start)
        .map(|(_, row)| row)
        .collect();
    if rows.is_empty() {
        return Err(EvalError::ValueTokenNotFound(value_range.start));
    }
    let width = heatmap.doc_tokens.len();
    let mut agg = vec![0.0; width];
    for row in &rows {
        for (a, v) in agg.iter_mut().zip(row.iter()) {
            *a += v;
        }
    }
    for a in &mut agg {
        *a /= rows.len() as f64;
    }
    let best = kadane_best_span(&agg, centering)?;
    let doc = &heatmap.doc_tokens;
    let span_offsets = (doc.char_spans[best.start].0, doc.char_spans[best.end].1);
    let span_text = doc.text_between(best.start, best.end).to_string();
    let grounded = numbers_in_text(&span_text).into_iter().any(|v| numbers_match(v, tuple.value));
    Ok(AttributionResult {
        tuple: tuple.clone(),
        span: (best.start, best.end),
        span_text,
        span_score: best.sum,
        span_offsets,
        grounded,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub centering: Centering,
    /// Report precision as the chart data score instead of the harmonic mean.
    pub precision_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataScores {
    pub grounding_precision: f64,
    /// `None` in reference-free mode.
    pub reference_recall: Option<f64>,
    pub chart_data_accuracy: f64,
    pub attribution: Vec<AttributionResult>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub grounding_precision: f64,
    pub reference_recall: Option<f64>,
    pub chart_data_accuracy: f64,
    pub type_best: u8,
    pub type_out_of_3: u8,
}

impl EvalScores {
    pub fn new(data: &DataScores, type_scores: (u8, u8)) -> Self {
        Self {
            grounding_precision: data.grounding_precision,
            reference_recall: data.reference_recall,
            chart_data_accuracy: data.chart_data_accuracy,
            type_best: type_scores.0,
            type_out_of_3: type_scores.1,
        }
    }
}

/// A reference chart as a table: one row per distinct x, one column per
/// series (the y-axis label when the chart has no categories). Points the
/// chart lacks are left blank.
pub fn chart_as_table(data: &ChartData) -> Table {
    let series: Vec<String> = if data.has_categories() {
        data.categories().into_iter().map(str::to_string).collect()
    } else {
        vec![data.y_axis_label.clone()]
    };
    let header = std::iter::once(data.x_axis_label.clone()).chain(series.iter().cloned()).collect();
    let rows = data
        .distinct_x()
        .into_iter()
        .map(|x| {
            let cells = series.iter().map(|s| {
                data.values
                    .iter()
                    .find(|p| {
                        p.x.to_string() == x.to_string() && p.category.as_deref().unwrap_or(&data.y_axis_label) == s
                    })
                    .map(|p| crate::chart::format_number(p.y))
                    .unwrap_or_default()
            });
            std::iter::once(x.to_string()).chain(cells).collect()
        })
        .collect();
    let caption = Some(data.title.clone());
    Table::new(caption, header, rows, 1).expect("a chart has at least one column")
}

/// Numeric body cells of a table. The first column holds row labels and is
/// skipped unless it is the only column.
pub fn numeric_cells(table: &Table) -> Vec<f64> {
    let skip = usize::from(table.width() > 1);
    table.rows.iter().flat_map(|r| r.iter().skip(skip)).filter_map(|c| normalize_number(c)).collect()
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Ground every tuple of `generated` in the reference and score the result.
pub fn score_chart_data(
    generated: &ChartData,
    reference: Reference<'_>,
    provider: &dyn HeatmapProvider,
    options: ScoreOptions,
) -> Result<DataScores, EvalError> {
    let cells = match reference {
        Reference::Table(t) => {
            let cells = numeric_cells(t);
            if cells.is_empty() {
                return Err(EvalError::NoNumericCells);
            }
            Some(cells)
        }
        Reference::Document(_) => None,
    };
    let (output, ranges) = generated.to_canonical_json_with_spans();
    let heatmap = compute_heatmap(&reference.render(), &output, provider)?;
    let attribution = chart_to_tuples(generated)
        .iter()
        .zip(ranges)
        .map(|(t, r)| attribute_tuple(t, r, &heatmap, options.centering))
        .collect::<Result<Vec<_>, _>>()?;

    let grounded: Vec<f64> = attribution.iter().filter(|a| a.grounded).map(|a| a.tuple.value).collect();
    let precision = 100.0 * grounded.len() as f64 / attribution.len() as f64;
    let recall = cells.map(|cells| {
        let hit = cells.iter().filter(|&&c| grounded.iter().any(|&g| numbers_match(c, g))).count();
        100.0 * hit as f64 / cells.len() as f64
    });
    let accuracy = match recall {
        Some(r) if !options.precision_only => harmonic_mean(precision, r),
        _ => precision,
    };
    Ok(DataScores {
        grounding_precision: precision,
        reference_recall: recall,
        chart_data_accuracy: accuracy,
        attribution,
    })
}

/// `(best, out_of_3)`: whether the top prediction is the first ground-truth
/// type, and whether it is any of them.
pub fn score_chart_type(predicted: &ChartTypeRecommendation, ground_truth: &[ChartType]) -> (u8, u8) {
    let top = predicted.top();
    let best = ground_truth.first() == Some(&top);
    let any = ground_truth.iter().take(3).any(|t| *t == top);
    (u8::from(best), u8::from(any))
}
