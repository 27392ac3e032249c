use super::{format_number, normalize_number, ChartData, ChartError, Scalar};

/// Addressable field of a [`ChartData`]:
/// `values[<idx>].(x|y|category) | title | x_axis_label | y_axis_label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPath {
    X(usize),
    Y(usize),
    Category(usize),
    Title,
    XAxisLabel,
    YAxisLabel,
}

impl FieldPath {
    pub fn parse(path: &str) -> Result<Self, ChartError> {
        let path = path.trim();
        let err = || ChartError::PathSyntax(path.to_string());
        match path {
            "title" => return Ok(FieldPath::Title),
            "x_axis_label" => return Ok(FieldPath::XAxisLabel),
            "y_axis_label" => return Ok(FieldPath::YAxisLabel),
            _ => {}
        }
        let rest = path.strip_prefix("values[").ok_or_else(err)?;
        let (index, field) = rest.split_once("].").ok_or_else(err)?;
        if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let index: usize = index.parse().map_err(|_| err())?;
        match field {
            "x" => Ok(FieldPath::X(index)),
            "y" => Ok(FieldPath::Y(index)),
            "category" => Ok(FieldPath::Category(index)),
            _ => Err(err()),
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            FieldPath::X(i) | FieldPath::Y(i) | FieldPath::Category(i) => Some(*i),
            _ => None,
        }
    }
}

/// Replace exactly one field and re-validate the result.
pub fn apply_field_path(data: &ChartData, path: &str, new_value: &Scalar) -> Result<ChartData, ChartError> {
    let field = FieldPath::parse(path)?;
    let mut out = data.clone();
    if let Some(index) = field.index() {
        if index >= out.values.len() {
            return Err(ChartError::IndexOutOfRange { index, len: out.values.len() });
        }
    }
    let as_text = |v: &Scalar| match v {
        Scalar::Text(s) => s.clone(),
        Scalar::Number(n) => format_number(*n),
    };
    match field {
        FieldPath::X(i) => {
            if let Scalar::Number(v) = new_value {
                if !v.is_finite() {
                    return Err(ChartError::Value(format!("{path}: x must be finite")));
                }
            }
            out.values[i].x = new_value.clone();
        }
        FieldPath::Y(i) => {
            let y = match new_value {
                Scalar::Number(v) if v.is_finite() => *v,
                Scalar::Number(_) => return Err(ChartError::Value(format!("{path}: y must be finite"))),
                Scalar::Text(s) => {
                    normalize_number(s).ok_or_else(|| ChartError::Value(format!("{path}: {s:?} is not numeric")))?
                }
            };
            out.values[i].y = y;
        }
        FieldPath::Category(i) => {
            let text = as_text(new_value).trim().to_string();
            if text.is_empty() {
                return Err(ChartError::Value(format!("{path}: category must be non-empty")));
            }
            out.values[i].category = Some(text);
        }
        FieldPath::Title => out.title = as_text(new_value),
        FieldPath::XAxisLabel => out.x_axis_label = as_text(new_value),
        FieldPath::YAxisLabel => out.y_axis_label = as_text(new_value),
    }
    out.validate()?;
    Ok(out)
}
