use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use doc2chart::chart::parse_chart_data;
use doc2chart::eval::{
    chart_as_table, score_chart_data, score_chart_type, Aggregation, Centering, HeatmapProvider, LexicalProvider,
    ProcessHeatmapProvider, Reference, ScoreOptions,
};
use doc2chart::harness::{
    correlate, load_dataset, load_document, read_report, report_table, run_benchmark, run_pipeline, write_artifacts,
    Method, PipelineConfig,
};
use doc2chart::ingest::{render_context, window_pages, DEFAULT_WINDOW_RADIUS};
use doc2chart::llm::{CacheMode, Gateway, ProviderConfig, ProviderKind, Session};
use doc2chart::typing::{ChartType, ChartTypeRecommendation, TypingMode};
use doc2chart::Table;

#[derive(Parser)]
#[command(name = "doc2chart", version, about = "Charts from long documents, and chart data evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a document and print its block structure as JSON.
    Ingest {
        file: PathBuf,
        /// Print the plain-text rendering instead of JSON.
        #[arg(long)]
        text: bool,
        #[arg(long)]
        center_page: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_WINDOW_RADIUS)]
        radius: u32,
    },
    /// Generate a chart for an intent over a document.
    Generate {
        #[arg(long)]
        intent: String,
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        center_page: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_WINDOW_RADIUS)]
        radius: u32,
        /// Directory for the chart artifacts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Artifact file stem.
        #[arg(long, default_value = "chart")]
        name: String,
        #[arg(long, value_enum, default_value_t = Typing::Llm)]
        typing: Typing,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Score chart data against a reference table or a whole document.
    Evaluate {
        /// Chart data JSON file.
        #[arg(long)]
        chart: PathBuf,
        /// Reference table JSON file: {"caption", "header", "rows", "page"}.
        #[arg(long, required_unless_present_any = ["reference_free", "reference_chart"])]
        reference: Option<PathBuf>,
        /// Reference chart data JSON file, scored as a table of its series.
        #[arg(long, conflicts_with_all = ["reference", "reference_free"])]
        reference_chart: Option<PathBuf>,
        /// Ground values in the whole document given by --doc.
        #[arg(long, requires = "doc")]
        reference_free: bool,
        #[arg(long)]
        doc: Option<PathBuf>,
        /// Predicted chart type, scored against --gt-types.
        #[arg(long, requires = "gt_types")]
        chart_type: Option<String>,
        /// Comma-separated ground-truth chart types, most preferred first.
        #[arg(long)]
        gt_types: Option<String>,
        #[arg(long)]
        precision_only: bool,
        #[command(flatten)]
        heatmap: HeatmapArgs,
    },
    /// Run methods over a sample manifest and write a report.
    Benchmark {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated methods, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Typing::Llm)]
        typing: Typing,
        #[arg(long)]
        precision_only: bool,
        #[command(flatten)]
        provider: ProviderArgs,
        #[command(flatten)]
        heatmap: HeatmapArgs,
    },
    /// Correlate a report's chart data scores with human ratings.
    Correlate {
        #[arg(long)]
        report: PathBuf,
        /// CSV with columns sample_id, rater_id, rating (1 to 4).
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value = "doc2chart")]
        method: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Typing {
    Heuristic,
    Llm,
}

impl From<Typing> for TypingMode {
    fn from(t: Typing) -> Self {
        match t {
            Typing::Heuristic => TypingMode::HeuristicOnly,
            Typing::Llm => TypingMode::LlmGuided,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderChoice {
    RuleBased,
    Scripted,
    Http,
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long, value_enum, default_value_t = ProviderChoice::RuleBased)]
    provider: ProviderChoice,
    /// Chat-completions endpoint for the http provider.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Script file for the scripted provider.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Persist responses under this directory and reuse them on later runs.
    #[arg(long, conflicts_with = "no_cache")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
}

impl ProviderArgs {
    fn config(&self) -> ProviderConfig {
        let kind = match self.provider {
            ProviderChoice::RuleBased => ProviderKind::RuleBased,
            ProviderChoice::Scripted => ProviderKind::Scripted,
            ProviderChoice::Http => ProviderKind::HttpApi,
        };
        let mut c = ProviderConfig::new(kind);
        c.endpoint = self.endpoint.clone();
        c.model_name = self.model.clone();
        c.temperature = self.temperature;
        c.script_path = self.script.clone();
        if matches!(self.provider, ProviderChoice::Http) {
            c.api_key_env = Some(self.api_key_env.clone());
        }
        c.cache = match (&self.cache_dir, self.no_cache) {
            (Some(dir), _) => CacheMode::Disk(dir.clone()),
            (None, true) => CacheMode::Off,
            (None, false) => CacheMode::Memory,
        };
        c
    }

    fn gateway(&self) -> Result<Gateway> {
        Gateway::from_config(self.config()).context("provider configuration")
    }
}

#[derive(Args)]
struct HeatmapArgs {
    /// Command line of an external heatmap process (JSON lines on stdin and
    /// stdout); the built-in lexical scorer is used when absent. Split on
    /// whitespace.
    #[arg(long)]
    heatmap_cmd: Option<String>,
    #[arg(long, value_enum, default_value_t = AggregationArg::MeanLayersHeads)]
    aggregation: AggregationArg,
    /// Row centering before the span search: `mean`, `none` or `quantile:Q`.
    #[arg(long, default_value = "mean", value_parser = parse_centering)]
    centering: Centering,
}

// Names mirror the provider protocol's aggregation modes.
#[allow(clippy::enum_variant_names)]
#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    MeanLayersHeads,
    LastLayerMeanHeads,
    MaxHeads,
}

fn parse_centering(s: &str) -> Result<Centering, String> {
    match s {
        "mean" => Ok(Centering::Mean),
        "none" => Ok(Centering::None),
        _ => match s.strip_prefix("quantile:").map(str::parse::<f64>) {
            Some(Ok(q)) if (0.0..=1.0).contains(&q) => Ok(Centering::Quantile(q)),
            _ => Err(format!("expected mean, none or quantile:Q with Q in [0, 1], got {s:?}")),
        },
    }
}

impl HeatmapArgs {
    fn provider(&self) -> Result<Box<dyn HeatmapProvider>> {
        let Some(cmd) = &self.heatmap_cmd else {
            return Ok(Box::new(LexicalProvider));
        };
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| anyhow!("--heatmap-cmd is empty"))?;
        let args: Vec<String> = parts.collect();
        let aggregation = match self.aggregation {
            AggregationArg::MeanLayersHeads => Aggregation::MeanLayersHeads,
            AggregationArg::LastLayerMeanHeads => Aggregation::LastLayerMeanHeads,
            AggregationArg::MaxHeads => Aggregation::MaxHeads,
        };
        Ok(Box::new(ProcessHeatmapProvider::spawn(&program, &args, aggregation)?))
    }
}

#[derive(Deserialize)]
struct TableFile {
    #[serde(default)]
    caption: Option<String>,
    header: Vec<String>,
    #[serde(default)]
    rows: Vec<Vec<String>>,
    #[serde(default)]
    page: Option<u32>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let t: TableFile = serde_json::from_str(&text).with_context(|| format!("{}: not a table", path.display()))?;
    Ok(Table::new(t.caption, t.header, t.rows, t.page.unwrap_or(1))?)
}

fn parse_types(s: &str) -> Result<Vec<ChartType>> {
    s.split(',').map(|t| t.trim().parse::<ChartType>().map_err(Into::into)).collect()
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Exit status for a completed command: 0 success, 1 partial failure.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ingest { file, text, center_page, radius } => {
            let mut doc = load_document(&file)?;
            if let Some(p) = center_page {
                doc = window_pages(&doc, p, radius)?;
            }
            if text {
                println!("{}", render_context(&doc));
            } else {
                print_json(&doc)?;
            }
            Ok(0)
        }
        Command::Generate { intent, doc, center_page, radius, out, name, typing, provider } => {
            let gateway = provider.gateway()?;
            let document = load_document(&doc)?;
            let config = PipelineConfig { typing_mode: typing.into(), window_radius: radius, ..Default::default() };
            let output = run_pipeline(&intent, &document, center_page, Session::new(&gateway, None), &config)?;
            let files = write_artifacts(&out, &name, &output)?;
            print_json(&json!({
                "chart_type": output.spec.chart_type,
                "ranked": output.recommendation.ranked,
                "rejected": output.rejected,
                "artifacts": files.iter().map(|f| out.join(f)).collect::<Vec<_>>(),
                "degraded": output.trace.as_ref().is_some_and(|t| t.degraded),
            }))?;
            Ok(0)
        }
        Command::Evaluate {
            chart,
            reference,
            reference_chart,
            reference_free,
            doc,
            chart_type,
            gt_types,
            precision_only,
            heatmap,
        } => {
            let text = fs::read_to_string(&chart).with_context(|| chart.display().to_string())?;
            let data = parse_chart_data(&text).with_context(|| format!("{}: invalid chart data", chart.display()))?;
            let options = ScoreOptions { centering: heatmap.centering, precision_only };
            let provider = heatmap.provider()?;
            let table;
            let document;
            let reference = if reference_free {
                document = load_document(doc.as_deref().expect("clap requires --doc"))?;
                Reference::Document(&document)
            } else if let Some(path) = &reference_chart {
                let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
                let gt = parse_chart_data(&text).with_context(|| format!("{}: invalid chart data", path.display()))?;
                table = chart_as_table(&gt);
                Reference::Table(&table)
            } else {
                table = read_table(reference.as_deref().expect("clap requires --reference"))?;
                Reference::Table(&table)
            };
            let scores = score_chart_data(&data, reference, provider.as_ref(), options)?;
            let types = match (chart_type, gt_types) {
                (Some(pred), Some(gt)) => {
                    let pred = ChartTypeRecommendation::single(pred.parse()?, "", 0.0);
                    let (best, out_of_3) = score_chart_type(&pred, &parse_types(&gt)?);
                    Some(json!({"type_best": best, "type_out_of_3": out_of_3}))
                }
                _ => None,
            };
            print_json(&json!({"scores": scores, "chart_type": types}))?;
            Ok(0)
        }
        Command::Benchmark { manifest, methods, out, typing, precision_only, provider, heatmap } => {
            let methods = Method::parse_list(&methods)?;
            if methods.is_empty() {
                bail!("no methods selected");
            }
            let samples = load_dataset(&manifest)?;
            let gateway = provider.gateway()?;
            let heatmaps = heatmap.provider()?;
            let mut config = PipelineConfig { typing_mode: typing.into(), ..Default::default() };
            config.score = ScoreOptions { centering: heatmap.centering, precision_only };
            let report = run_benchmark(&samples, &methods, &gateway, heatmaps.as_ref(), &config, &out)?;
            print!("{}", report_table(&report));
            let failures = report.failures();
            if failures > 0 {
                eprintln!(
                    "{failures} of {} runs failed; see {}",
                    report.per_sample.len(),
                    out.join("report.json").display()
                );
                return Ok(1);
            }
            Ok(0)
        }
        Command::Correlate { report, ratings, method } => {
            let report = read_report(&report)?;
            let csv = fs::read_to_string(&ratings).with_context(|| ratings.display().to_string())?;
            let c = correlate(&report, &csv, method.parse()?)?;
            print_json(&c)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
