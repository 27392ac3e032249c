use serde::Serialize;

use super::tokenize::{tokenized, TokenizedText};
use super::EvalError;
use crate::chart::{normalize_number, numbers_match};

/// Output-token by document-token score matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapMatrix {
    pub out_tokens: TokenizedText,
    pub doc_tokens: TokenizedText,
    pub scores: Vec<Vec<f64>>,
}

impl HeatmapMatrix {
    pub fn new(out_tokens: TokenizedText, doc_tokens: TokenizedText, scores: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        if scores.len() != out_tokens.len() {
            return Err(EvalError::ShapeMismatch(format!(
                "{} score rows for {} output tokens",
                scores.len(),
                out_tokens.len()
            )));
        }
        for (i, row) in scores.iter().enumerate() {
            if row.len() != doc_tokens.len() {
                return Err(EvalError::ShapeMismatch(format!(
                    "row {i} has {} columns for {} document tokens",
                    row.len(),
                    doc_tokens.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EvalError::ProviderError(format!("row {i} has a non-finite score")));
            }
        }
        Ok(Self { out_tokens, doc_tokens, scores })
    }
}

/// Source of heatmaps. Implementations must be safe to share across threads;
/// a connection-backed provider serializes its own requests.
pub trait HeatmapProvider: Send + Sync {
    fn heatmap(&self, document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError>;
}

/// Deterministic token-matching stand-in for attention.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalProvider;

impl HeatmapProvider for LexicalProvider {
    fn heatmap(&self, document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError> {
        lexical_heatmap(document_text, output_text)
    }
}

/// 1.0 for case-insensitive token equality, 0.5 for equal numeric values with
/// different surface forms, 0 otherwise.
pub fn lexical_heatmap(document_text: &str, output_text: &str) -> Result<HeatmapMatrix, EvalError> {
    let doc = tokenized(document_text).ok_or(EvalError::EmptyInput)?;
    let out = tokenized(output_text).ok_or(EvalError::EmptyInput)?;
    let doc_keys: Vec<(String, Option<f64>)> =
        doc.tokens.iter().map(|t| (t.to_lowercase(), normalize_number(t))).collect();
    let scores = out
        .tokens
        .iter()
        .map(|t| {
            let key = t.to_lowercase();
            let num = normalize_number(t);
            doc_keys
                .iter()
                .map(|(k, n)| {
                    if *k == key {
                        1.0
                    } else if matches!((num, n), (Some(a), Some(b)) if numbers_match(a, *b)) {
                        0.5
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    HeatmapMatrix::new(out, doc, scores)
}

/// Ask `provider` for a heatmap after checking both texts are non-empty.
pub fn compute_heatmap(
    document_text: &str,
    output_text: &str,
    provider: &dyn HeatmapProvider,
) -> Result<HeatmapMatrix, EvalError> {
    if document_text.trim().is_empty() || output_text.trim().is_empty() {
        return Err(EvalError::EmptyInput);
    }
    provider.heatmap(document_text, output_text)
}
