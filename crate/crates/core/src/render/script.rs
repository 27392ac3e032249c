use std::fmt::Write;

use super::ChartSpec;
use crate::chart::format_number;
use crate::typing::ChartType;

fn py_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn py_list(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}

/// A self-contained matplotlib script drawing the spec. The data is inlined;
/// nothing here runs it.
pub fn emit_plot_script(spec: &ChartSpec) -> String {
    let data = &spec.data;
    let mut s = String::new();
    s.push_str("import matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    let _ = writeln!(
        s,
        "fig, ax = plt.subplots(figsize=({}, {}), dpi=100)",
        format_number(spec.width as f64 / 100.0),
        format_number(spec.height as f64 / 100.0)
    );

    let mut labels: Vec<String> = Vec::new();
    for p in &data.values {
        let l = p.x.to_string();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let categories = data.categories();
    let single_stack = spec.chart_type == ChartType::StackedBar && categories.is_empty();

    if categories.is_empty() || spec.chart_type == ChartType::Pie {
        let x = py_list(data.values.iter().map(|p| py_str(&p.x.to_string())));
        let y = py_list(data.values.iter().map(|p| format_number(p.y)));
        let _ = writeln!(s, "x = {x}\ny = {y}");
        match spec.chart_type {
            ChartType::Line => s.push_str("ax.plot(x, y, marker=\"o\")\n"),
            ChartType::Area => s.push_str("ax.fill_between(range(len(x)), y, alpha=0.35)\nax.plot(range(len(x)), y, marker=\"o\")\nax.set_xticks(range(len(x)), x)\n"),
            ChartType::Scatter => s.push_str("ax.scatter(x, y)\n"),
            ChartType::Pie => s.push_str("ax.pie(y, labels=x, autopct=\"%1.1f%%\", startangle=90, counterclock=False)\nax.axis(\"equal\")\n"),
            _ if single_stack => {
                let _ = writeln!(s, "bottom = 0\nfor label, value in zip(x, y):\n    ax.bar([{}], [value], bottom=bottom, label=label)\n    bottom += value", py_str(&data.y_axis_label));
            }
            _ => s.push_str("ax.bar(x, y)\n"),
        }
    } else {
        let _ = writeln!(s, "labels = {}", py_list(labels.iter().map(|l| py_str(l))));
        s.push_str("series = [\n");
        for c in &categories {
            let values = labels.iter().map(|l| {
                data.values
                    .iter()
                    .find(|p| p.category.as_deref() == Some(*c) && p.x.to_string() == *l)
                    .map(|p| format_number(p.y))
                    .unwrap_or_else(|| "float(\"nan\")".to_string())
            });
            let _ = writeln!(s, "    ({}, {}),", py_str(c), py_list(values));
        }
        s.push_str("]\n");
        match spec.chart_type {
            ChartType::Line => s.push_str("for name, values in series:\n    ax.plot(labels, values, marker=\"o\", label=name)\n"),
            ChartType::Area => s.push_str("for name, values in series:\n    ax.fill_between(range(len(labels)), values, alpha=0.35, label=name)\nax.set_xticks(range(len(labels)), labels)\n"),
            ChartType::Scatter => s.push_str("for name, values in series:\n    ax.scatter(labels, values, label=name)\n"),
            ChartType::StackedBar => s.push_str(
                "bottom = [0.0] * len(labels)\nfor name, values in series:\n    values = [0.0 if v != v else v for v in values]\n    ax.bar(labels, values, bottom=bottom, label=name)\n    bottom = [b + v for b, v in zip(bottom, values)]\n",
            ),
            _ => s.push_str(
                "width = 0.8 / len(series)\nfor i, (name, values) in enumerate(series):\n    offset = (i - (len(series) - 1) / 2) * width\n    ax.bar([k + offset for k in range(len(labels))], values, width, label=name)\nax.set_xticks(range(len(labels)), labels)\n",
            ),
        }
    }

    if spec.chart_type != ChartType::Pie {
        let _ = writeln!(s, "ax.set_xlabel({})", py_str(&data.x_axis_label));
        let _ = writeln!(s, "ax.set_ylabel({})", py_str(&data.y_axis_label));
    }
    if !data.title.is_empty() {
        let _ = writeln!(s, "ax.set_title({})", py_str(&data.title));
    }
    if spec.legend && spec.chart_type != ChartType::Pie {
        s.push_str("ax.legend()\n");
    }
    s.push_str("fig.tight_layout()\nfig.savefig(\"chart.png\")\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartData, DataPoint};
    use crate::render::build_spec;

    fn data(title: &str) -> ChartData {
        let values = vec![DataPoint::new("2021", 10.0), DataPoint::new("2022", 12.5), DataPoint::new("2023", 9.0)];
        ChartData::new(values, "Year", "Revenue", title).unwrap()
    }

    #[test]
    fn bar_contains_values() {
        let script = emit_plot_script(&build_spec(&data("T"), ChartType::Bar).unwrap());
        for v in ["10", "12.5", "9"] {
            assert!(script.contains(v));
        }
        assert!(script.contains("ax.set_title(\"T\")"));
    }

    #[test]
    fn line_keeps_label_order() {
        let script = emit_plot_script(&build_spec(&data("T"), ChartType::Line).unwrap());
        assert!(script.contains(r#"x = ["2021", "2022", "2023"]"#));
    }

    #[test]
    fn empty_title_omitted() {
        let script = emit_plot_script(&build_spec(&data(""), ChartType::Bar).unwrap());
        assert!(!script.contains("set_title"));
    }
}
