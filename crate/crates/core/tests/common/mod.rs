//! Checks shared by the per-criterion tests and the acceptance target. Each
//! returns a one-line summary on success and a description of the first
//! disagreement on failure.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use doc2chart::chart::{normalize_number, numbers_in_text, numbers_match, parse_chart_data};
use doc2chart::eval::{
    kadane_best_span, pearson_r, score_chart_data, Centering, LexicalProvider, Reference, ScoreOptions,
};
use doc2chart::extract::Action;
use doc2chart::harness::{load_dataset, run_benchmark, Method, PipelineConfig, RunReport};
use doc2chart::llm::{CacheMode, Gateway, ProviderConfig, ProviderKind};
use doc2chart::render::{build_spec, count_marks, render_svg};
use doc2chart::typing::{profile_data, recommend_heuristic, ChartType, DataProfile, IntentClass, XKind};
use doc2chart::{ChartData, DataPoint, Table};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn corpus_manifest() -> PathBuf {
    data_dir().join("corpus/manifest.jsonl")
}

// ---------------------------------------------------------------- Kadane

/// Exhaustive best span with the same tie-breaking: highest sum, then the
/// smallest start, then the shortest span.
pub fn brute_force_span(centered: &[f64]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for start in 0..centered.len() {
        let mut sum = 0.0;
        for (end, v) in centered.iter().enumerate().skip(start) {
            sum += v;
            if sum > best.2 {
                best = (start, end, sum);
            }
        }
    }
    best
}

fn plain_mean(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

pub fn check_kadane(vectors: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let started = Instant::now();
    for case in 0..vectors {
        let len = rng.gen_range(1..=64);
        let row: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        for centering in [Centering::None, Centering::Mean] {
            let shift = if centering == Centering::Mean { plain_mean(&row) } else { 0.0 };
            let centered: Vec<f64> = row.iter().map(|v| v - shift).collect();
            let (start, end, sum) = brute_force_span(&centered);
            let got = kadane_best_span(&row, centering).map_err(|e| format!("case {case}: {e}"))?;
            if (got.start, got.end) != (start, end) || (got.sum - sum).abs() > 1e-12 {
                return Err(format!(
                    "case {case} ({centering:?}): kadane ({}, {}, {}) vs oracle ({start}, {end}, {sum})",
                    got.start, got.end, got.sum
                ));
            }
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(5) {
        return Err(format!("{vectors} vectors took {elapsed:?}"));
    }
    Ok(format!("{vectors} vectors x 2 centerings agree in {elapsed:?}"))
}

// ---------------------------------------------------------------- rule table

pub fn check_rule_table() -> Check {
    let path = data_dir().join("rule_table.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let mut cases = 0;
    for (line, record) in reader.records().enumerate() {
        let r = record.map_err(|e| e.to_string())?;
        let x_kind = match &r[0] {
            "temporal" => XKind::Temporal,
            "categorical" => XKind::Categorical,
            "numeric" => XKind::Numeric,
            other => return Err(format!("row {}: bad x_kind {other}", line + 2)),
        };
        let intent = match &r[5] {
            "unknown" => IntentClass::Unknown,
            "magnitude" => IntentClass::Magnitude,
            "trend" => IntentClass::Trend,
            "composition" => IntentClass::Composition,
            other => return Err(format!("row {}: bad intent {other}", line + 2)),
        };
        let profile = DataProfile {
            x_kind,
            point_count: r[1].parse().map_err(|_| "bad point_count")?,
            category_count: r[2].parse().map_err(|_| "bad category_count")?,
            is_proportional: &r[3] == "true",
            regular_spacing: &r[4] == "true",
        };
        let expected: Vec<ChartType> =
            (6..9).filter(|&i| !r[i].is_empty()).map(|i| r[i].parse().expect("chart type name")).collect();
        let got = recommend_heuristic(&profile, intent).types();
        if got != expected {
            return Err(format!("row {}: {profile:?} {intent:?} gave {got:?}, table says {expected:?}", line + 2));
        }
        cases += 1;
    }
    if cases < 900 {
        return Err(format!("only {cases} cases in the rule table"));
    }
    Ok(format!("{cases} profile x intent cases agree"))
}

// ---------------------------------------------------------------- attribution

const LABELS: [&str; 8] = ["Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel"];
const SERIES: [&str; 3] = ["North", "South", "West"];

fn random_cell(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(10..999).to_string(),
        1 => {
            let v: u32 = rng.gen_range(1_000..999_999);
            let s = v.to_string();
            let (head, tail) = s.split_at(s.len() - 3);
            format!("{head},{tail}")
        }
        2 => format!("{:.2}", rng.gen_range(1.0..500.0)),
        _ => format!("-{:.1}", rng.gen_range(1.0..90.0)),
    }
}

/// A table of distinct values and the chart that copies it verbatim.
pub fn synthetic_pair(rng: &mut ChaCha8Rng) -> (Table, ChartData) {
    let rows = rng.gen_range(2..=8);
    let cols = rng.gen_range(1..=3);
    let mut seen: Vec<f64> = Vec::new();
    let mut body = Vec::new();
    let mut points = Vec::new();
    for label in &LABELS[..rows] {
        let mut row = vec![label.to_string()];
        for series in &SERIES[..cols] {
            let cell = loop {
                let c = random_cell(rng);
                let v = normalize_number(&c).expect("numeric cell");
                if !seen.iter().any(|&s| numbers_match(s, v)) {
                    seen.push(v);
                    break c;
                }
            };
            let y = normalize_number(&cell).expect("numeric cell");
            let point = DataPoint::new(*label, y);
            points.push(if cols > 1 { point.with_category(*series) } else { point });
            row.push(cell);
        }
        body.push(row);
    }
    let header = std::iter::once("Item").chain(SERIES[..cols].iter().copied()).map(str::to_string).collect();
    let table = Table::new(Some("Synthetic figures".into()), header, body, 1).expect("valid table");
    let y_label = if cols > 1 { "Value" } else { SERIES[0] };
    let chart = ChartData::new(points, "Item", y_label, "Synthetic figures").expect("valid chart");
    (table, chart)
}

/// Change one digit of `v` so the result matches no number in `forbidden`.
pub fn perturb(v: f64, forbidden: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let text = doc2chart::chart::format_number(v);
    let digits: Vec<usize> = text.char_indices().filter(|(_, c)| c.is_ascii_digit()).map(|(i, _)| i).collect();
    let mut order = digits.clone();
    order.shuffle(rng);
    for at in order {
        let old = text.as_bytes()[at] - b'0';
        for step in 1..10u8 {
            let new = (old + step) % 10;
            let mut s = text.clone().into_bytes();
            s[at] = b'0' + new;
            let candidate: f64 = String::from_utf8(s).unwrap().parse().unwrap();
            if candidate != 0.0 && !forbidden.iter().any(|&f| numbers_match(f, candidate)) {
                return candidate;
            }
        }
    }
    panic!("no single-digit perturbation of {v} avoids the table");
}

pub fn check_attribution(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let options = ScoreOptions::default();
    for case in 0..pairs {
        let (table, chart) = synthetic_pair(&mut rng);
        let reference = Reference::Table(&table);
        let verbatim = score_chart_data(&chart, reference, &LexicalProvider, options).map_err(|e| e.to_string())?;
        if verbatim.grounding_precision != 100.0 {
            return Err(format!("pair {case}: verbatim precision {}", verbatim.grounding_precision));
        }
        let forbidden = numbers_in_text(&reference.render());
        let mut perturbed = chart.clone();
        for p in &mut perturbed.values {
            p.y = perturb(p.y, &forbidden, &mut rng);
        }
        let scores = score_chart_data(&perturbed, reference, &LexicalProvider, options).map_err(|e| e.to_string())?;
        if scores.grounding_precision != 0.0 {
            return Err(format!("pair {case}: perturbed precision {}", scores.grounding_precision));
        }
    }
    Ok(format!("{pairs} pairs: verbatim 100, perturbed 0"))
}

// ---------------------------------------------------------------- benchmark

pub fn gateway(kind: ProviderKind) -> Gateway {
    let mut config = ProviderConfig::new(kind).with_cache(CacheMode::Memory);
    if kind == ProviderKind::Scripted {
        config.script_path = Some(data_dir().join("corpus/script.json"));
    }
    Gateway::from_config(config).expect("gateway")
}

pub fn run_corpus(kind: ProviderKind, out: &Path) -> Result<RunReport, String> {
    let samples = load_dataset(&corpus_manifest()).map_err(|e| e.to_string())?;
    run_benchmark(&samples, &Method::ALL, &gateway(kind), &LexicalProvider, &PipelineConfig::default(), out)
        .map_err(|e| e.to_string())
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn check_loop_traces() -> Check {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_corpus(ProviderKind::Scripted, first.path())?;
    run_corpus(ProviderKind::Scripted, second.path())?;
    let mut traces = 0;
    for row in report.per_sample.iter().filter(|r| r.method == Method::Doc2chart) {
        let trace = row.trace.as_ref().ok_or_else(|| format!("{}: no trace", row.sample_id))?;
        let s = trace.steps;
        let extract_calls = s.extractions + s.failed_extractions;
        if extract_calls > 3 || s.validations != s.extractions || s.refinements > 1 {
            return Err(format!("{}: step counts {s:?} out of bounds", row.sample_id));
        }
        if row.sample_id == "fin_hotel" && trace.actions() != [Action::ReExtract, Action::Refine] {
            return Err(format!("fin_hotel actions {:?}", trace.actions()));
        }
        traces += 1;
    }
    if traces != 10 {
        return Err(format!("expected 10 traces, got {traces}"));
    }
    let (a, b) = (read_tree(first.path()), read_tree(second.path()));
    if a != b {
        let differing: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        return Err(format!("artifacts differ between runs: {differing:?}"));
    }
    Ok(format!("{traces} traces within bounds, fin_hotel [re_extract, refine], {} identical files", a.len()))
}

pub fn check_benchmark_fixture() -> Check {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_corpus(ProviderKind::RuleBased, out.path())?;
    let expected_path = data_dir().join("corpus/expected_report.json");
    let expected = fs::read_to_string(&expected_path).map_err(|e| e.to_string())?;
    let produced = fs::read_to_string(out.path().join("report.json")).map_err(|e| e.to_string())?;
    if produced != expected {
        return Err("report.json differs from the committed fixture".into());
    }
    let mut reserialized = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    reserialized.push('\n');
    if reserialized != expected {
        return Err("returned report differs from the committed fixture".into());
    }
    let mean = |m| report.aggregate(m).map(|a| a.chart_data_accuracy).ok_or("missing aggregate");
    let (ours, single) = (mean(Method::Doc2chart)?, mean(Method::SingleStep)?);
    if ours - single < 10.0 {
        return Err(format!("doc2chart {ours:.2} vs single_step {single:.2}: gap below 10"));
    }
    Ok(format!("report matches fixture; doc2chart {ours:.2} vs single_step {single:.2}"))
}

// ---------------------------------------------------------------- schema

pub fn check_schema_suite() -> Check {
    let dir = data_dir().join("schema");
    let expected: BTreeMap<String, String> =
        serde_json::from_str(&fs::read_to_string(dir.join("expected_errors.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let mut invalid = 0;
    for (name, category) in &expected {
        let text = fs::read_to_string(dir.join("invalid").join(format!("{name}.json"))).map_err(|e| e.to_string())?;
        match parse_chart_data(&text) {
            Ok(_) => return Err(format!("{name}: accepted")),
            Err(e) if e.category() != category => {
                return Err(format!("{name}: category {} ({e}), expected {category}", e.category()))
            }
            Err(_) => invalid += 1,
        }
    }
    let mut valid = 0;
    let mut entries: Vec<_> = fs::read_dir(dir.join("valid")).map_err(|e| e.to_string())?.collect();
    entries.sort_by_key(|e| e.as_ref().map(|e| e.path()).ok());
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let data = parse_chart_data(&text).map_err(|e| format!("{}: rejected: {e}", path.display()))?;
        let again = parse_chart_data(&data.to_canonical_json()).map_err(|e| e.to_string())?;
        if again != data {
            return Err(format!("{}: canonical round trip changed the data", path.display()));
        }
        let reference: serde_json::Value = serde_json::from_str(&text).unwrap();
        let canonical: serde_json::Value = serde_json::from_str(&data.to_canonical_json()).unwrap();
        if reference != canonical {
            return Err(format!("{}: canonical JSON differs from the fixture", path.display()));
        }
        valid += 1;
    }
    if (invalid, valid) != (12, 12) {
        return Err(format!("expected 12 invalid and 12 valid fixtures, found {invalid} and {valid}"));
    }
    Ok("12 violations rejected by category, 12 valid round-trip".into())
}

// ---------------------------------------------------------------- pearson

/// Two-pass textbook formula.
pub fn direct_pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (plain_mean(a), plain_mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn check_pearson(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..pairs {
        let n = rng.gen_range(3..=60);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.3 * x + rng.gen_range(-40.0..40.0)).collect();
        let got = pearson_r(&a, &b).map_err(|e| format!("case {case}: {e}"))?;
        let want = direct_pearson(&a, &b);
        if (got - want).abs() > 1e-12 {
            return Err(format!("case {case}: {got} vs {want}"));
        }
    }
    for case in 0..20 {
        let n = rng.gen_range(4..=40);
        let mut ratings: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(1..=4u8))).collect();
        ratings[0] = 1.0;
        ratings[1] = 4.0;
        let scale = [12.5, 25.0, 0.5, 3.0][case % 4];
        let offset = [0.0, 10.0, -7.5, 50.25][case % 4];
        let scores: Vec<f64> = ratings.iter().map(|r| scale * r + offset).collect();
        let r = pearson_r(&scores, &ratings).map_err(|e| e.to_string())?;
        if r != 1.0 {
            return Err(format!("affine case {case}: r = {r:?}"));
        }
    }
    Ok(format!("{pairs} random pairs within 1e-12; 20 affine rating sets give exactly 1.0"))
}

// ---------------------------------------------------------------- renderer

/// Random chart data across the x kinds, with or without categories.
pub fn random_chart(rng: &mut ChaCha8Rng) -> ChartData {
    let n = rng.gen_range(1..=12);
    let c = if rng.gen_bool(0.4) { rng.gen_range(2..=4) } else { 0 };
    let kind = rng.gen_range(0..3);
    let xs: Vec<doc2chart::Scalar> = (0..n)
        .map(|i| match kind {
            0 => doc2chart::Scalar::Text(format!("{}", 2000 + i)),
            1 => doc2chart::Scalar::Text(LABELS.get(i).map_or_else(|| format!("Item {i}"), |s| s.to_string())),
            _ => doc2chart::Scalar::Number(i as f64 * 1.5 + 0.25),
        })
        .collect();
    let proportional = c == 0 && rng.gen_bool(0.3);
    let mut values = Vec::new();
    if proportional {
        let share = 100.0 / n as f64;
        for x in &xs {
            values.push(DataPoint { x: x.clone(), y: share, category: None });
        }
    } else {
        for x in &xs {
            if c == 0 {
                values.push(DataPoint { x: x.clone(), y: rng.gen_range(-50.0..500.0_f64).round(), category: None });
            } else {
                for series in &SERIES[..c.min(3)] {
                    let y = rng.gen_range(0.0..300.0_f64).round();
                    values.push(DataPoint { x: x.clone(), y, category: Some(series.to_string()) });
                }
            }
        }
    }
    ChartData::new(values, "X", "Y", "Random chart").expect("valid random chart")
}

pub fn check_renderer(specs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intents = [IntentClass::Unknown, IntentClass::Magnitude, IntentClass::Trend, IntentClass::Composition];
    for case in 0..specs {
        let data = random_chart(&mut rng);
        let intent = intents[case % intents.len()];
        let types = recommend_heuristic(&profile_data(&data), intent).types();
        let chart_type = types[rng.gen_range(0..types.len())];
        let spec = build_spec(&data, chart_type).map_err(|e| format!("case {case}: ranked type rejected: {e}"))?;
        let svg = render_svg(&spec);
        let marks = count_marks(&svg);
        if marks != data.values.len() {
            return Err(format!("case {case}: {chart_type} drew {marks} marks for {} values", data.values.len()));
        }
        if render_svg(&spec.clone()) != svg {
            return Err(format!("case {case}: rendering is not deterministic"));
        }
    }
    Ok(format!("{specs} random specs: marks equal values, renders byte-identical"))
}
