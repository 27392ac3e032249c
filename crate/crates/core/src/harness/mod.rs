//! Datasets, pipeline runs, benchmark reports and metric correlation.

mod dataset;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::baselines::{run_baseline, BaselineConfig, BaselineError, BaselineMethod};
use crate::chart::ChartData;
use crate::eval::{
    pearson_r, score_chart_data, score_chart_type, AttributionResult, EvalError, EvalScores, HeatmapProvider,
    Reference, ScoreOptions,
};
use crate::extract::{run_extraction_loop, ExtractError, LoopConfig, LoopTrace};
use crate::ingest::{extract_tables, window_pages, Document, IngestError, DEFAULT_WINDOW_RADIUS};
use crate::llm::{Gateway, Session};
use crate::render::{build_spec, emit_plot_script, render_svg, ChartSpec, RenderError};
use crate::typing::{recommend, ChartType, ChartTypeRecommendation, TypingMode};

pub use dataset::{load_dataset, load_document, Sample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("missing document {0}")]
    MissingDocument(PathBuf),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("document has {tables} tables, reference index {index} is out of range")]
    NoReferenceTable { index: usize, tables: usize },
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("ratings: {0}")]
    Ratings(String),
}

fn io_err(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Doc2chart,
    SingleStep,
    EmbedRetrieval,
    LlmRetrieval,
    LlmRetrievalQd,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Doc2chart, Method::SingleStep, Method::EmbedRetrieval, Method::LlmRetrieval, Method::LlmRetrievalQd];

    pub fn as_str(&self) -> &'static str {
        match self.baseline() {
            Some(b) => b.as_str(),
            None => "doc2chart",
        }
    }

    pub fn baseline(&self) -> Option<BaselineMethod> {
        match self {
            Method::Doc2chart => None,
            Method::SingleStep => Some(BaselineMethod::SingleStep),
            Method::EmbedRetrieval => Some(BaselineMethod::EmbedRetrieval),
            Method::LlmRetrieval => Some(BaselineMethod::LlmRetrieval),
            Method::LlmRetrievalQd => Some(BaselineMethod::LlmRetrievalQd),
        }
    }

    /// Comma-separated method names; `all` selects every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>, HarnessError> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let m: Method = name.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| HarnessError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub loop_config: LoopConfig,
    pub typing_mode: TypingMode,
    pub window_radius: u32,
    pub baseline: BaselineConfig,
    pub score: ScoreOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            loop_config: LoopConfig::default(),
            typing_mode: TypingMode::default(),
            window_radius: DEFAULT_WINDOW_RADIUS,
            baseline: BaselineConfig::default(),
            score: ScoreOptions::default(),
        }
    }
}

/// A ranked chart type the data could not be drawn as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedType {
    pub chart_type: ChartType,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub data: ChartData,
    pub recommendation: ChartTypeRecommendation,
    pub spec: ChartSpec,
    pub rejected: Vec<RejectedType>,
    pub trace: Option<LoopTrace>,
}

/// Spec for the first ranked type the data supports, falling back to bar.
pub fn spec_for(
    data: &ChartData,
    recommendation: &ChartTypeRecommendation,
) -> Result<(ChartSpec, Vec<RejectedType>), RenderError> {
    let mut rejected = Vec::new();
    let mut last = None;
    let mut candidates = recommendation.types();
    if !candidates.contains(&ChartType::Bar) {
        candidates.push(ChartType::Bar);
    }
    for t in candidates {
        match build_spec(data, t) {
            Ok(spec) => return Ok((spec, rejected)),
            Err(e) => {
                rejected.push(RejectedType { chart_type: t, reason: e.to_string() });
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one candidate"))
}

/// Full pipeline on one document: optional page window, extraction loop,
/// chart-type recommendation and the chart spec.
pub fn run_pipeline(
    intent: &str,
    doc: &Document,
    center_page: Option<u32>,
    session: Session<'_>,
    config: &PipelineConfig,
) -> Result<PipelineOutput, HarnessError> {
    let windowed;
    let doc = match center_page {
        Some(p) => {
            windowed = window_pages(doc, p, config.window_radius)?;
            &windowed
        }
        None => doc,
    };
    let trace = run_extraction_loop(intent, doc, session, &config.loop_config)?;
    let data = trace.final_data.clone();
    let recommendation = recommend(intent, &data, session, config.typing_mode);
    let (spec, rejected) = spec_for(&data, &recommendation)?;
    Ok(PipelineOutput { data, recommendation, spec, rejected, trace: Some(trace) })
}

/// A baseline method run, shaped like a pipeline output.
pub fn run_method(
    method: Method,
    intent: &str,
    doc: &Document,
    center_page: Option<u32>,
    session: Session<'_>,
    config: &PipelineConfig,
) -> Result<PipelineOutput, HarnessError> {
    let Some(baseline) = method.baseline() else {
        return run_pipeline(intent, doc, center_page, session, config);
    };
    let out = run_baseline(baseline, intent, doc, session, &config.baseline)?;
    let (spec, rejected) = spec_for(&out.data, &out.recommendation)?;
    Ok(PipelineOutput { data: out.data, recommendation: out.recommendation, spec, rejected, trace: None })
}

/// Write `<stem>.svg`, `<stem>.spec.json`, `<stem>.plot.txt` and, for
/// pipeline runs, `<stem>.trace.json` into `dir`. Returns the file names.
pub fn write_artifacts(dir: &Path, stem: &str, output: &PipelineOutput) -> Result<Vec<String>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = vec![
        (format!("{stem}.svg"), render_svg(&output.spec)),
        (format!("{stem}.spec.json"), to_json(&output.spec)),
        (format!("{stem}.plot.txt"), emit_plot_script(&output.spec)),
    ];
    if let Some(trace) = &output.trace {
        files.push((format!("{stem}.trace.json"), to_json(trace)));
    }
    for (name, body) in &files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    }
    Ok(files.into_iter().map(|(n, _)| n).collect())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sample_id: String,
    pub method: Method,
    pub scores: EvalScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_type: Option<ChartType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<LoopTrace>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub attribution: Vec<AttributionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub samples: usize,
    pub failures: usize,
    pub chart_data_accuracy: f64,
    pub type_best: f64,
    pub type_out_of_3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub per_sample: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.per_sample.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn aggregate(&self, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

/// Per-method means of the rows, in the order methods first appear.
pub fn aggregate_rows(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.method == m).collect();
            let n = mine.len() as f64;
            let mean = |f: &dyn Fn(&ReportRow) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / n;
            Aggregate {
                method: m,
                samples: mine.len(),
                failures: mine.iter().filter(|r| r.error.is_some()).count(),
                chart_data_accuracy: mean(&|r| r.scores.chart_data_accuracy),
                type_best: mean(&|r| f64::from(r.scores.type_best)),
                type_out_of_3: mean(&|r| f64::from(r.scores.type_out_of_3)),
            }
        })
        .collect()
}

/// Aligned text table; type scores are shown as percentages.
pub fn report_table(report: &RunReport) -> String {
    let header = ["Method", "Chart Data", "Best", "Out-of-3"];
    let mut rows: Vec<[String; 4]> = vec![header.map(str::to_string)];
    for a in &report.aggregates {
        rows.push([
            a.method.to_string(),
            format!("{:.2}", a.chart_data_accuracy),
            format!("{:.2}", 100.0 * a.type_best),
            format!("{:.2}", 100.0 * a.type_out_of_3),
        ]);
    }
    let widths: Vec<usize> = (0..4).map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        out.push('|');
        for j in 0..4 {
            if j == 0 {
                out.push_str(&format!(" {:<w$} |", r[j], w = widths[j]));
            } else {
                out.push_str(&format!(" {:>w$} |", r[j], w = widths[j]));
            }
        }
        out.push('\n');
        if i == 0 {
            out.push('|');
            for w in &widths {
                out.push_str(&format!("{}|", "-".repeat(w + 2)));
            }
            out.push('\n');
        }
    }
    out
}

/// Score one output against the sample's reference table, or against the
/// whole document when the sample names none.
pub fn score_output(
    output: &PipelineOutput,
    sample: &Sample,
    doc: &Document,
    heatmaps: &dyn HeatmapProvider,
    options: ScoreOptions,
) -> Result<(EvalScores, Vec<AttributionResult>), HarnessError> {
    let tables;
    let reference = match sample.reference_table_index {
        Some(index) => {
            tables = extract_tables(doc);
            let table = tables.get(index).ok_or(HarnessError::NoReferenceTable { index, tables: tables.len() })?;
            Reference::Table(table)
        }
        None => Reference::Document(doc),
    };
    let data = score_chart_data(&output.data, reference, heatmaps, options)?;
    let types = score_chart_type(&output.recommendation, &sample.gt_chart_types);
    Ok((EvalScores::new(&data, types), data.attribution))
}

fn failed_row(sample: &Sample, method: Method, e: &HarnessError) -> ReportRow {
    warn!(sample = %sample.id, %method, "run failed: {e}");
    ReportRow {
        sample_id: sample.id.clone(),
        method,
        scores: EvalScores::default(),
        chart_type: None,
        trace: None,
        artifacts: Vec::new(),
        attribution: Vec::new(),
        error: Some(e.to_string()),
    }
}

fn run_row(
    sample: &Sample,
    doc: &Document,
    method: Method,
    gateway: &Gateway,
    heatmaps: &dyn HeatmapProvider,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<ReportRow, HarnessError> {
    let session = Session::new(gateway, Some(&sample.id));
    let output = run_method(method, &sample.intent, doc, sample.center_page, session, config)?;
    let dir = out_dir.join(method.as_str());
    let artifacts = write_artifacts(&dir, &sample.id, &output)?
        .into_iter()
        .map(|name| format!("{}/{name}", method.as_str()))
        .collect();
    let (scores, attribution) = score_output(&output, sample, doc, heatmaps, config.score)?;
    Ok(ReportRow {
        sample_id: sample.id.clone(),
        method,
        scores,
        chart_type: Some(output.spec.chart_type),
        trace: output.trace,
        artifacts,
        attribution,
        error: None,
    })
}

/// Run every (sample, method) pair and write `report.json` and `report.txt`
/// into `out_dir`. Samples run in parallel, methods within a sample in order;
/// rows are sorted by (sample id, method). Failed runs score 0 and carry
/// their error.
pub fn run_benchmark(
    samples: &[Sample],
    methods: &[Method],
    gateway: &Gateway,
    heatmaps: &dyn HeatmapProvider,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunReport, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut rows: Vec<ReportRow> = samples
        .par_iter()
        .flat_map_iter(|sample| {
            let doc = load_document(&sample.document_path);
            methods
                .iter()
                .map(|&m| match &doc {
                    Ok(doc) => run_row(sample, doc, m, gateway, heatmaps, config, out_dir)
                        .unwrap_or_else(|e| failed_row(sample, m, &e)),
                    Err(e) => failed_row(sample, m, e),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    rows.sort_by(|a, b| a.sample_id.cmp(&b.sample_id).then(a.method.cmp(&b.method)));
    let mut aggregates = aggregate_rows(&rows);
    aggregates.sort_by_key(|a| a.method);
    let report = RunReport { per_sample: rows, aggregates };
    let json_path = out_dir.join("report.json");
    fs::write(&json_path, to_json(&report)).map_err(|e| io_err(&json_path, e))?;
    let txt_path = out_dir.join("report.txt");
    fs::write(&txt_path, report_table(&report)).map_err(|e| io_err(&txt_path, e))?;
    info!(rows = report.per_sample.len(), failures = report.failures(), "benchmark finished");
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<RunReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Deserialize)]
struct RatingRecord {
    sample_id: String,
    rating: u8,
}

/// Majority rating per sample from `sample_id,rater_id,rating` rows; ties go
/// to the lowest rating.
pub fn majority_ratings(csv_text: &str) -> Result<BTreeMap<String, u8>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_text.as_bytes());
    let mut counts: BTreeMap<String, BTreeMap<u8, usize>> = BTreeMap::new();
    for (i, rec) in reader.deserialize::<RatingRecord>().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Ratings(format!("row {}: {e}", i + 1)))?;
        if !(1..=4).contains(&rec.rating) {
            return Err(HarnessError::Ratings(format!("row {}: rating {} outside 1..=4", i + 1, rec.rating)));
        }
        *counts.entry(rec.sample_id).or_default().entry(rec.rating).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(id, c)| {
            // Ascending rating order with a strict comparison keeps the lowest on ties.
            let mut best = (0u8, 0usize);
            for (rating, n) in c {
                if n > best.1 {
                    best = (rating, n);
                }
            }
            (id, best.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub pearson_r: f64,
    pub samples: usize,
}

/// Pearson r between `method`'s chart data accuracy and the majority human
/// rating, over samples present in both.
pub fn correlate(report: &RunReport, ratings_csv: &str, method: Method) -> Result<Correlation, HarnessError> {
    let ratings = majority_ratings(ratings_csv)?;
    let (metric, human): (Vec<f64>, Vec<f64>) = report
        .per_sample
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| ratings.get(&r.sample_id).map(|&h| (r.scores.chart_data_accuracy, f64::from(h))))
        .unzip();
    let r = pearson_r(&metric, &human)?;
    Ok(Correlation { pearson_r: r, samples: metric.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, method: Method, acc: f64, best: u8, any: u8) -> ReportRow {
        ReportRow {
            sample_id: id.into(),
            method,
            scores: EvalScores { chart_data_accuracy: acc, type_best: best, type_out_of_3: any, ..Default::default() },
            chart_type: None,
            trace: None,
            artifacts: vec![],
            attribution: vec![],
            error: None,
        }
    }

    #[test]
    fn aggregates_are_means() {
        let rows = vec![
            row("a", Method::Doc2chart, 80.0, 1, 1),
            row("b", Method::Doc2chart, 60.0, 0, 1),
            row("a", Method::SingleStep, 50.0, 0, 0),
        ];
        let agg = aggregate_rows(&rows);
        assert_eq!(agg[0].chart_data_accuracy, 70.0);
        assert_eq!((agg[0].type_best, agg[0].type_out_of_3), (0.5, 1.0));
        assert_eq!(agg[1].samples, 1);
        let table = report_table(&RunReport { per_sample: rows, aggregates: agg });
        let first = table.lines().next().unwrap();
        assert!(first.find("Chart Data").unwrap() < first.find("Best").unwrap());
        assert!(first.find("Best").unwrap() < first.find("Out-of-3").unwrap());
        assert!(table.contains("| doc2chart   |      70.00 | 50.00 |   100.00 |"));
    }

    #[test]
    fn majority_and_correlation() {
        let csv = "sample_id,rater_id,rating\na,r1,4\na,r2,4\na,r3,1\nb,r1,2\nb,r2,3\nc,r1,3\n";
        let m = majority_ratings(csv).unwrap();
        assert_eq!(m["a"], 4);
        assert_eq!(m["b"], 2);
        let rows = vec![
            row("a", Method::Doc2chart, 90.0, 0, 0),
            row("b", Method::Doc2chart, 40.0, 0, 0),
            row("c", Method::Doc2chart, 65.0, 0, 0),
        ];
        let report = RunReport { aggregates: aggregate_rows(&rows), per_sample: rows };
        let c = correlate(&report, csv, Method::Doc2chart).unwrap();
        assert_eq!((c.pearson_r, c.samples), (1.0, 3));
        assert!(majority_ratings("sample_id,rater_id,rating\na,r1,7\n").is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(Method::parse_list("all").unwrap(), Method::ALL);
        assert_eq!(Method::parse_list("doc2chart, single_step").unwrap(), [Method::Doc2chart, Method::SingleStep]);
        assert!(Method::parse_list("magic").is_err());
    }
}
