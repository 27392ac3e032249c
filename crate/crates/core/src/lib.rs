//! # doc2chart
//!
//! Intent-driven chart generation from long documents.
//!
//! Given a document and a natural-language intent, the pipeline extracts chart
//! data with an LLM, validates it against the source, re-extracts or refines as
//! needed, picks a chart type from data-shape heuristics and renders the chart.
//! The crate also ships an attribution-based metric that grounds each generated
//! chart value in a reference table (or the whole source document), plus the
//! comparison baselines and a benchmark harness.
//!
//! ## Modules
//!
//! - [`ingest`] - HTML/Markdown parsing into a paged block model, table extraction, windowing
//! - [`chart`] - chart data schema, number normalization, field-path edits
//! - [`llm`] - prompt templates, provider gateway with caching, scripted and rule-based providers
//! - [`extract`] - the extract / validate / re-extract / refine loop
//! - [`typing`] - chart-type heuristics and LLM-guided recommendation
//! - [`render`] - chart specs, SVG rendering, plotting-script emission
//! - [`eval`] - attribution heatmaps, best-span search, chart data and chart type scoring
//! - [`baselines`] - single-step and retrieval-based comparison methods
//! - [`harness`] - datasets, pipeline runs, benchmark reports, metric correlation

pub mod baselines;
pub mod chart;
pub mod eval;
pub mod extract;
pub mod harness;
pub mod ingest;
pub mod llm;
pub mod render;
pub mod text;
pub mod typing;

pub use chart::{ChartData, ChartTuple, DataPoint, Scalar};
pub use ingest::{Block, BlockKind, Document, Table};
