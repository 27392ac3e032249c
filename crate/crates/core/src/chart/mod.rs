//! Chart data schema.
//!
//! [`ChartData`] mirrors the JSON the extraction step produces:
//!
//! ```json
//! {"values":[{"x":"2021","y":10,"category":"US"}],
//!  "x_axis_label":"Year","y_axis_label":"Revenue","title":"Revenue by year"}
//! ```
//!
//! Parsing is strict about structure and lenient about number surface forms
//! (see [`number`]). Canonical serialization keeps that field order, prints
//! integral numbers without a fractional part and omits absent categories.

pub mod number;
mod path;

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

pub use number::{format_number, normalize_number, numbers_in_text, numbers_match};
pub use path::{apply_field_path, FieldPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("invalid JSON: {0}")]
    JsonSyntax(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("chart has no data points")]
    EmptyValues,
    #[error("duplicate data point key: {0}")]
    DuplicateKey(String),
    #[error("invalid field path: {0}")]
    PathSyntax(String),
    #[error("index {index} out of range for {len} data points")]
    IndexOutOfRange { index: usize, len: usize },
}

impl ChartError {
    /// Stable snake_case category name, used in fixtures and reports.
    pub fn category(&self) -> &'static str {
        match self {
            ChartError::JsonSyntax(_) => "json_syntax",
            ChartError::Schema(_) => "schema",
            ChartError::Value(_) => "value",
            ChartError::EmptyValues => "empty_values",
            ChartError::DuplicateKey(_) => "duplicate_key",
            ChartError::PathSyntax(_) => "path_syntax",
            ChartError::IndexOutOfRange { .. } => "index_out_of_range",
        }
    }
}

/// An x value: either a label or a finite number.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Number(f64),
}

impl Scalar {
    pub fn from_json(value: &Value) -> Option<Scalar> {
        match value {
            Value::String(s) => Some(Scalar::Text(s.clone())),
            Value::Number(n) => n.as_f64().filter(|v| v.is_finite()).map(Scalar::Number),
            _ => None,
        }
    }

    /// Numeric reading: numbers as-is, text through the number grammar.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(v) => Some(*v),
            Scalar::Text(s) => normalize_number(s),
        }
    }

    /// Key used for duplicate detection; `2021` and `"2021"` collide.
    pub(crate) fn key(&self) -> String {
        match self {
            Scalar::Number(v) => format_number(*v),
            Scalar::Text(s) => s.trim().to_string(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Text(s) => f.write_str(s),
            Scalar::Number(v) => f.write_str(&format_number(*v)),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Text(s) => serializer.serialize_str(s),
            Scalar::Number(v) => serialize_number(v, serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Scalar::from_json(&value).ok_or_else(|| serde::de::Error::custom("expected string or finite number"))
    }
}

fn serialize_number<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        serializer.serialize_i64(*v as i64)
    } else {
        serializer.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPoint {
    pub x: Scalar,
    #[serde(serialize_with = "serialize_number")]
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl DataPoint {
    pub fn new(x: impl Into<Scalar>, y: f64) -> Self {
        Self { x: x.into(), y, category: None }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartData {
    pub values: Vec<DataPoint>,
    pub x_axis_label: String,
    pub y_axis_label: String,
    pub title: String,
}

impl<'de> Deserialize<'de> for ChartData {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        chart_from_value(&value).map_err(serde::de::Error::custom)
    }
}

/// One unit of attribution: `(x, series, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTuple {
    pub x: Scalar,
    pub series: String,
    pub value: f64,
}

impl ChartData {
    /// Build and validate.
    pub fn new(
        values: Vec<DataPoint>,
        x_axis_label: impl Into<String>,
        y_axis_label: impl Into<String>,
        title: impl Into<String>,
    ) -> Result<Self, ChartError> {
        let data =
            Self { values, x_axis_label: x_axis_label.into(), y_axis_label: y_axis_label.into(), title: title.into() };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.values.is_empty() {
            return Err(ChartError::EmptyValues);
        }
        let mut seen = HashSet::new();
        for (i, p) in self.values.iter().enumerate() {
            if !p.y.is_finite() {
                return Err(ChartError::Value(format!("values[{i}].y is not finite")));
            }
            if let Scalar::Number(x) = p.x {
                if !x.is_finite() {
                    return Err(ChartError::Value(format!("values[{i}].x is not finite")));
                }
            }
            if p.category.as_deref().is_some_and(|c| c.trim().is_empty()) {
                return Err(ChartError::Value(format!("values[{i}].category is empty")));
            }
            let key = (p.x.key(), p.category.clone());
            if !seen.insert(key) {
                let label = match &p.category {
                    Some(c) => format!("x={} category={c}", p.x),
                    None => format!("x={}", p.x),
                };
                return Err(ChartError::DuplicateKey(label));
            }
        }
        Ok(())
    }

    pub fn has_categories(&self) -> bool {
        self.values.iter().any(|p| p.category.is_some())
    }

    /// Distinct categories in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.values.iter().filter_map(|p| p.category.as_deref()) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Distinct x values in first-appearance order.
    pub fn distinct_x(&self) -> Vec<&Scalar> {
        let mut keys = HashSet::new();
        let mut out = Vec::new();
        for p in &self.values {
            if keys.insert(p.x.key()) {
                out.push(&p.x);
            }
        }
        out
    }

    /// Canonical compact JSON.
    pub fn to_canonical_json(&self) -> String {
        self.to_canonical_json_with_spans().0
    }

    /// Canonical JSON plus the byte range of each point's `y` literal.
    pub fn to_canonical_json_with_spans(&self) -> (String, Vec<Range<usize>>) {
        let quote = |s: &str| serde_json::to_string(s).expect("string serialization");
        let mut out = String::from("{\"values\":[");
        let mut spans = Vec::with_capacity(self.values.len());
        for (i, p) in self.values.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str("{\"x\":");
            match &p.x {
                Scalar::Text(s) => out.push_str(&quote(s)),
                Scalar::Number(v) => out.push_str(&json_number(*v)),
            }
            out.push_str(",\"y\":");
            let start = out.len();
            out.push_str(&json_number(p.y));
            spans.push(start..out.len());
            if let Some(c) = &p.category {
                out.push_str(",\"category\":");
                out.push_str(&quote(c));
            }
            out.push('}');
        }
        out.push_str("],\"x_axis_label\":");
        out.push_str(&quote(&self.x_axis_label));
        out.push_str(",\"y_axis_label\":");
        out.push_str(&quote(&self.y_axis_label));
        out.push_str(",\"title\":");
        out.push_str(&quote(&self.title));
        out.push('}');
        (out, spans)
    }
}

/// JSON number text identical to what serde_json emits for the canonical form.
fn json_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        (v as i64).to_string()
    } else {
        serde_json::to_string(&v).expect("finite float")
    }
}

/// Parse extraction output into validated [`ChartData`].
pub fn parse_chart_data(json_text: &str) -> Result<ChartData, ChartError> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| ChartError::JsonSyntax(e.to_string()))?;
    chart_from_value(&value)
}

/// Schema check and conversion from an already-parsed JSON value.
pub fn chart_from_value(value: &Value) -> Result<ChartData, ChartError> {
    let obj = value.as_object().ok_or_else(|| ChartError::Schema("top level must be an object".into()))?;
    let values = match obj.get("values") {
        None => return Err(ChartError::Schema("missing field `values`".into())),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(ChartError::Schema("`values` must be an array".into())),
    };
    if values.is_empty() {
        return Err(ChartError::EmptyValues);
    }
    let label = |name: &str| match obj.get(name) {
        None => Err(ChartError::Schema(format!("missing field `{name}`"))),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(ChartError::Schema(format!("`{name}` must be a string"))),
    };
    let x_axis_label = label("x_axis_label")?;
    let y_axis_label = label("y_axis_label")?;
    let title = label("title")?;

    let points = values.iter().enumerate().map(|(i, v)| point_from_value(i, v)).collect::<Result<Vec<_>, _>>()?;
    ChartData::new(points, x_axis_label, y_axis_label, title)
}

fn point_from_value(i: usize, value: &Value) -> Result<DataPoint, ChartError> {
    let obj = value.as_object().ok_or_else(|| ChartError::Schema(format!("values[{i}] must be an object")))?;
    let x = match obj.get("x") {
        None => return Err(ChartError::Schema(format!("values[{i}] missing field `x`"))),
        Some(v @ (Value::String(_) | Value::Number(_))) => {
            Scalar::from_json(v).ok_or_else(|| ChartError::Value(format!("values[{i}].x is not a finite number")))?
        }
        Some(_) => return Err(ChartError::Schema(format!("values[{i}].x must be a string or number"))),
    };
    let y = match obj.get("y") {
        None => return Err(ChartError::Schema(format!("values[{i}] missing field `y`"))),
        Some(Value::Number(n)) => n
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ChartError::Value(format!("values[{i}].y is not finite")))?,
        Some(Value::String(s)) => {
            normalize_number(s).ok_or_else(|| ChartError::Value(format!("values[{i}].y = {s:?} is not numeric")))?
        }
        Some(Value::Null) => return Err(ChartError::Value(format!("values[{i}].y is null"))),
        Some(_) => return Err(ChartError::Schema(format!("values[{i}].y must be a number or numeric string"))),
    };
    let category = match obj.get("category") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.trim().to_string()).filter(|s| !s.is_empty()),
        Some(Value::Number(n)) => n.as_f64().map(format_number),
        Some(_) => return Err(ChartError::Schema(format!("values[{i}].category must be a string"))),
    };
    Ok(DataPoint { x, y, category })
}

/// Decompose into `(x, series, value)` tuples; series is the category when
/// present, otherwise the y-axis label.
pub fn chart_to_tuples(data: &ChartData) -> Vec<ChartTuple> {
    data.values
        .iter()
        .map(|p| ChartTuple {
            x: p.x.clone(),
            series: p.category.clone().unwrap_or_else(|| data.y_axis_label.clone()),
            value: p.y,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"values":[{"x":"2021","y":10}],"x_axis_label":"Year","y_axis_label":"Revenue","title":"T"}"#;

    #[test]
    fn parses_minimal_chart() {
        let data = parse_chart_data(ONE).unwrap();
        assert_eq!(data.values, vec![DataPoint::new("2021", 10.0)]);
        assert_eq!(data.to_canonical_json(), ONE);
    }

    #[test]
    fn thousands_separator_in_y() {
        let data = parse_chart_data(&ONE.replace("\"y\":10", "\"y\":\"1,234\"")).unwrap();
        assert_eq!(data.values[0].y, 1234.0);
    }

    #[test]
    fn empty_values() {
        assert_eq!(parse_chart_data(r#"{"values":[]}"#), Err(ChartError::EmptyValues));
    }

    #[test]
    fn error_categories() {
        assert_eq!(parse_chart_data("{").unwrap_err().category(), "json_syntax");
        assert_eq!(parse_chart_data(r#"{"values":[{"x":"a","y":1}]}"#).unwrap_err().category(), "schema");
        let bad_y = ONE.replace("\"y\":10", "\"y\":\"ten\"");
        assert_eq!(parse_chart_data(&bad_y).unwrap_err().category(), "value");
        let dup = ONE.replace(r#"{"x":"2021","y":10}"#, r#"{"x":"2021","y":10},{"x":2021,"y":11}"#);
        assert_eq!(parse_chart_data(&dup).unwrap_err().category(), "duplicate_key");
    }

    #[test]
    fn categories_disambiguate_duplicates() {
        let json = r#"{"values":[{"x":"2021","y":1,"category":"US"},{"x":"2021","y":2,"category":"EU"}],"x_axis_label":"","y_axis_label":"","title":""}"#;
        let data = parse_chart_data(json).unwrap();
        assert_eq!(data.categories(), vec!["US", "EU"]);
        assert_eq!(data.distinct_x().len(), 1);
    }

    #[test]
    fn serde_matches_canonical_writer() {
        let data = ChartData::new(
            vec![
                DataPoint::new("Q1", 5.5).with_category("A \"quoted\""),
                DataPoint::new(3.0, -2.0),
                DataPoint::new(0.25, 1e-7),
            ],
            "x",
            "y",
            "t",
        )
        .unwrap();
        let (canonical, spans) = data.to_canonical_json_with_spans();
        assert_eq!(serde_json::to_string(&data).unwrap(), canonical);
        assert_eq!(&canonical[spans[0].clone()], "5.5");
        assert_eq!(&canonical[spans[1].clone()], "-2");
        let back: ChartData = serde_json::from_str(&canonical).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn tuples_use_category_or_y_label() {
        let data = ChartData::new(vec![DataPoint::new("2021", 10.0).with_category("US")], "Year", "Price", "").unwrap();
        assert_eq!(chart_to_tuples(&data), vec![ChartTuple { x: "2021".into(), series: "US".into(), value: 10.0 }]);
        let data = ChartData::new(vec![DataPoint::new("Q1", 5.0)], "Quarter", "Sales", "").unwrap();
        assert_eq!(chart_to_tuples(&data)[0].series, "Sales");
    }
}
