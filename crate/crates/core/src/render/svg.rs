use std::fmt::Write;

use super::{legend_entries, ChartSpec};
use crate::chart::{format_number, DataPoint};
use crate::typing::{parse_temporal, ChartType};

/// Fixed categorical color cycle, assigned by first appearance.
const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;
const LEGEND_WIDTH: f64 = 160.0;

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Coordinates print with two decimals so output is stable across platforms.
fn n(v: f64) -> String {
    let r = format!("{v:.2}");
    if r == "-0.00" {
        "0.00".to_string()
    } else {
        r
    }
}

fn tick_label(v: f64) -> String {
    format_number((v * 1e6).round() / 1e6)
}

struct Plot {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Plot {
    fn width(&self) -> f64 {
        self.right - self.left
    }
    fn height(&self) -> f64 {
        self.bottom - self.top
    }
}

struct YScale {
    lo: f64,
    hi: f64,
    top: f64,
    bottom: f64,
}

impl YScale {
    fn new(lo: f64, hi: f64, plot: &Plot) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        Self { lo, hi, top: plot.top, bottom: plot.bottom }
    }
    fn at(&self, v: f64) -> f64 {
        self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)
    }
}

/// Distinct labels in first-appearance order.
fn distinct<S: AsRef<str>>(items: impl Iterator<Item = S>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let item = item.as_ref();
        if !out.iter().any(|o| o == item) {
            out.push(item.to_string());
        }
    }
    out
}

fn x_label(p: &DataPoint) -> String {
    p.x.to_string()
}

/// Series membership of each point: its category's first-appearance index, or 0.
fn series_of(spec: &ChartSpec) -> (Vec<String>, Vec<usize>) {
    let names = distinct(spec.data.values.iter().filter_map(|p| p.category.as_deref()));
    let index = spec
        .data
        .values
        .iter()
        .map(|p| p.category.as_ref().and_then(|c| names.iter().position(|n| n == c)).unwrap_or(0))
        .collect();
    (names, index)
}

/// Deterministic SVG for a spec. Each data point yields exactly one element
/// with `class="mark"`.
pub fn render_svg(spec: &ChartSpec) -> String {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let legend = legend_entries(spec);
    let plot = Plot {
        left: MARGIN_LEFT,
        right: w - MARGIN_RIGHT - if legend.is_empty() { 0.0 } else { LEGEND_WIDTH },
        top: MARGIN_TOP,
        bottom: h - MARGIN_BOTTOM,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        out,
        r##"<rect class="background" x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        spec.width, spec.height
    );
    if !spec.data.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="28" text-anchor="middle" font-size="18">{}</text>"#,
            n(w / 2.0),
            esc(&spec.data.title)
        );
    }
    match spec.chart_type {
        ChartType::Pie => draw_pie(&mut out, spec, &plot),
        ChartType::Scatter => draw_scatter(&mut out, spec, &plot),
        _ => draw_banded(&mut out, spec, &plot),
    }
    if !legend.is_empty() {
        draw_legend(&mut out, &legend, plot.right + 20.0, plot.top);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_axes(out: &mut String, spec: &ChartSpec, plot: &Plot, y: &YScale) {
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#333333"/>"##,
        l = n(plot.left),
        r = n(plot.right),
        b = n(y.at(y.lo.max(0.0).min(y.hi)))
    );
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="#333333"/>"##,
        l = n(plot.left),
        t = n(plot.top),
        b = n(plot.bottom)
    );
    for k in 0..=5 {
        let v = y.lo + (y.hi - y.lo) * k as f64 / 5.0;
        let py = y.at(v);
        let _ = writeln!(
            out,
            r##"<line class="grid" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#e0e0e0"/>"##,
            n(plot.left),
            n(py),
            n(plot.right),
            n(py)
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{}" y="{}" text-anchor="end">{}</text>"#,
            n(plot.left - 6.0),
            n(py + 4.0),
            tick_label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        n((plot.left + plot.right) / 2.0),
        n(plot.bottom + 50.0),
        esc(&spec.data.x_axis_label)
    );
    let cy = (plot.top + plot.bottom) / 2.0;
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="20" y="{cy}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {cy})">{}</text>"#,
        esc(&spec.data.y_axis_label),
        cy = n(cy)
    );
}

fn draw_band_labels(out: &mut String, labels: &[String], plot: &Plot) {
    let band = plot.width() / labels.len().max(1) as f64;
    for (i, label) in labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="x-tick" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            n(plot.left + band * (i as f64 + 0.5)),
            n(plot.bottom + 18.0),
            esc(label)
        );
    }
}

/// Bar, grouped, stacked, line and area charts over categorical x bands.
fn draw_banded(out: &mut String, spec: &ChartSpec, plot: &Plot) {
    let values = &spec.data.values;
    let (series, member) = series_of(spec);
    let series_count = series.len().max(1);
    let single_stack = spec.chart_type == ChartType::StackedBar && !spec.data.has_categories();
    let labels =
        if single_stack { vec![spec.data.y_axis_label.clone()] } else { distinct(values.iter().map(|p| p.x.key())) };
    let band_of =
        |p: &DataPoint| if single_stack { 0 } else { labels.iter().position(|l| *l == p.x.key()).unwrap_or(0) };

    let stacked = spec.chart_type == ChartType::StackedBar;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if stacked {
        let mut pos = vec![0.0; labels.len()];
        let mut neg = vec![0.0; labels.len()];
        for p in values {
            let b = band_of(p);
            if p.y >= 0.0 {
                pos[b] += p.y;
            } else {
                neg[b] += p.y;
            }
        }
        hi = pos.iter().copied().fold(hi, f64::max);
        lo = neg.iter().copied().fold(lo, f64::min);
    } else {
        for p in values {
            hi = hi.max(p.y);
            lo = lo.min(p.y);
        }
    }
    let y = YScale::new(lo, hi, plot);
    draw_axes(out, spec, plot, &y);
    draw_band_labels(out, &labels, plot);

    let band = plot.width() / labels.len().max(1) as f64;
    let center = |b: usize| plot.left + band * (b as f64 + 0.5);
    let zero = y.at(0.0f64.clamp(y.lo, y.hi));
    match spec.chart_type {
        ChartType::Line | ChartType::Area => {
            for s in 0..series_count {
                let pts: Vec<(f64, f64)> = values
                    .iter()
                    .zip(&member)
                    .filter(|(_, m)| **m == s)
                    .map(|(p, _)| (center(band_of(p)), y.at(p.y)))
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                let color = PALETTE[s % PALETTE.len()];
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", n(*x), n(*y))).collect();
                if spec.chart_type == ChartType::Area {
                    let first = pts.first().unwrap().0;
                    let last = pts.last().unwrap().0;
                    let _ = writeln!(
                        out,
                        r#"<polygon class="series-area" points="{},{} {} {},{}" fill="{color}" fill-opacity="0.35" stroke="none"/>"#,
                        n(first),
                        n(zero),
                        path.join(" "),
                        n(last),
                        n(zero)
                    );
                }
                let _ = writeln!(
                    out,
                    r#"<polyline class="series-line" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    path.join(" ")
                );
            }
            for (p, &s) in values.iter().zip(&member) {
                let _ = writeln!(
                    out,
                    r#"<circle class="mark" cx="{}" cy="{}" r="4" fill="{}"><title>{}</title></circle>"#,
                    n(center(band_of(p))),
                    n(y.at(p.y)),
                    PALETTE[s % PALETTE.len()],
                    esc(&point_title(p))
                );
            }
        }
        ChartType::StackedBar => {
            let width = band * 0.6;
            let mut pos = vec![0.0; labels.len()];
            let mut neg = vec![0.0; labels.len()];
            for (i, (p, &s)) in values.iter().zip(&member).enumerate() {
                let b = band_of(p);
                let base = if p.y >= 0.0 { &mut pos[b] } else { &mut neg[b] };
                let (from, to) = (*base, *base + p.y);
                *base = to;
                let color = if single_stack { PALETTE[i % PALETTE.len()] } else { PALETTE[s % PALETTE.len()] };
                rect(out, center(b) - width / 2.0, y.at(from), y.at(to), width, color, p);
            }
        }
        _ => {
            // Plain and grouped bars: one slot per series inside each band.
            let slot = band * 0.8 / series_count as f64;
            for (p, &s) in values.iter().zip(&member) {
                let b = band_of(p);
                let x = plot.left + band * b as f64 + band * 0.1 + slot * s as f64;
                rect(out, x + slot * 0.05, zero, y.at(p.y), slot * 0.9, PALETTE[s % PALETTE.len()], p);
            }
        }
    }
}

fn point_title(p: &DataPoint) -> String {
    match &p.category {
        Some(c) => format!("{} / {}: {}", x_label(p), c, format_number(p.y)),
        None => format!("{}: {}", x_label(p), format_number(p.y)),
    }
}

fn rect(out: &mut String, x: f64, y_from: f64, y_to: f64, width: f64, color: &str, p: &DataPoint) {
    let (top, height) = if y_to < y_from { (y_to, y_from - y_to) } else { (y_from, y_to - y_from) };
    let _ = writeln!(
        out,
        r#"<rect class="mark" x="{}" y="{}" width="{}" height="{}" fill="{color}"><title>{}</title></rect>"#,
        n(x),
        n(top),
        n(width),
        n(height),
        esc(&point_title(p))
    );
}

fn x_position(p: &DataPoint) -> f64 {
    parse_temporal(&p.x).map(|t| t.ordinal as f64).or_else(|| p.x.as_number()).unwrap_or(0.0)
}

fn draw_scatter(out: &mut String, spec: &ChartSpec, plot: &Plot) {
    let values = &spec.data.values;
    let (_, member) = series_of(spec);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for p in values {
        lo = lo.min(p.y);
        hi = hi.max(p.y);
    }
    let y = YScale::new(lo, hi, plot);
    draw_axes(out, spec, plot, &y);
    let xs: Vec<f64> = values.iter().map(x_position).collect();
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let inset = plot.width() * 0.05;
    let at = |v: f64| plot.left + inset + (v - xmin) / span * (plot.width() - 2.0 * inset);
    let mut seen: Vec<String> = Vec::new();
    for (p, x) in values.iter().zip(&xs) {
        let label = x_label(p);
        if !seen.contains(&label) {
            let _ = writeln!(
                out,
                r#"<text class="x-tick" x="{}" y="{}" text-anchor="middle">{}</text>"#,
                n(at(*x)),
                n(plot.bottom + 18.0),
                esc(&label)
            );
            seen.push(label);
        }
    }
    for ((p, x), &s) in values.iter().zip(&xs).zip(&member) {
        let _ = writeln!(
            out,
            r#"<circle class="mark" cx="{}" cy="{}" r="5" fill="{}"><title>{}</title></circle>"#,
            n(at(*x)),
            n(y.at(p.y)),
            PALETTE[s % PALETTE.len()],
            esc(&point_title(p))
        );
    }
}

fn draw_pie(out: &mut String, spec: &ChartSpec, plot: &Plot) {
    let values = &spec.data.values;
    let total: f64 = values.iter().map(|p| p.y.max(0.0)).sum();
    let cx = (plot.left + plot.right) / 2.0;
    let cy = (plot.top + plot.bottom) / 2.0;
    let r = (plot.width().min(plot.height()) / 2.0 - 10.0).max(10.0);
    let mut angle = -std::f64::consts::FRAC_PI_2;
    for (i, p) in values.iter().enumerate() {
        let share = if total > 0.0 { p.y.max(0.0) / total } else { 1.0 / values.len() as f64 };
        let sweep = share * std::f64::consts::TAU;
        let color = PALETTE[i % PALETTE.len()];
        let d = if share >= 1.0 - 1e-12 {
            // A full circle as two half arcs.
            format!(
                "M {} {} A {r} {r} 0 1 1 {} {} A {r} {r} 0 1 1 {} {} Z",
                n(cx),
                n(cy - r),
                n(cx),
                n(cy + r),
                n(cx),
                n(cy - r),
                r = n(r)
            )
        } else {
            let (x0, y0) = (cx + r * angle.cos(), cy + r * angle.sin());
            let end = angle + sweep;
            let (x1, y1) = (cx + r * end.cos(), cy + r * end.sin());
            let large = if sweep > std::f64::consts::PI { 1 } else { 0 };
            format!("M {} {} L {} {} A {r} {r} 0 {large} 1 {} {} Z", n(cx), n(cy), n(x0), n(y0), n(x1), n(y1), r = n(r))
        };
        let _ = writeln!(
            out,
            r##"<path class="mark" d="{d}" fill="{color}" stroke="#ffffff"><title>{}</title></path>"##,
            esc(&point_title(p))
        );
        angle += sweep;
    }
}

fn draw_legend(out: &mut String, entries: &[String], x: f64, y: f64) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, entry) in entries.iter().enumerate() {
        let row = y + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text></g>"#,
            n(x),
            n(row),
            PALETTE[i % PALETTE.len()],
            n(x + 18.0),
            n(row + 10.0),
            esc(entry)
        );
    }
    out.push_str("</g>\n");
}

/// Number of data marks in a rendered SVG.
pub fn count_marks(svg: &str) -> usize {
    svg.matches(r#"class="mark""#).count()
}
