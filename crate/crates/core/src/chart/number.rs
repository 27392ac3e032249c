//! The one number grammar used for chart values and for attribution matching.
//!
//! Accepted surface forms: optional sign, digits with `,` thousands
//! separators, decimal point, scientific exponent, a leading `$`, a trailing
//! `%`, surrounding whitespace, the Unicode minus sign and accounting-style
//! parentheses for negatives (`(1,234)` is -1234). Percentages keep their face
//! value.

/// Parse a surface number; `None` when the text is not a finite number.
pub fn normalize_number(text: &str) -> Option<f64> {
    let mut s: String = text
        .trim()
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, ',' | '$' | '%'))
        .map(|c| if c == '\u{2212}' { '-' } else { c })
        .collect();
    let mut negate = false;
    if s.len() >= 3 && s.starts_with('(') && s.ends_with(')') {
        s = s[1..s.len() - 1].to_string();
        negate = true;
    }
    if s.is_empty() || !s.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    if !s.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')) {
        return None;
    }
    let value: f64 = s.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    Some(if negate { -value } else { value })
}

/// Canonical text form: integral values print without a fractional part.
pub fn format_number(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// Equality under the matcher's relative tolerance of 1e-9.
pub fn numbers_match(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= 1e-9 * scale
}

/// Every number that appears in free text, in order of appearance.
///
/// Tokens are maximal runs of digits and number punctuation, optionally
/// wrapped in accounting parentheses, so `revenue (1,234) in 2021` yields
/// `[-1234, 2021]`.
pub fn numbers_in_text(text: &str) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '\u{2212}' || c == '.')
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
                && (i == 0 || !chars[i - 1].is_alphanumeric()));
        if !starts_number {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < chars.len() {
            let c = chars[i];
            let next_digit = |k: usize| chars.get(k).is_some_and(|n| n.is_ascii_digit());
            let continues = match c {
                '0'..='9' => true,
                ',' | '.' => next_digit(i + 1),
                'e' | 'E' => {
                    next_digit(i + 1) || (chars.get(i + 1).is_some_and(|n| *n == '-' || *n == '+') && next_digit(i + 2))
                }
                '-' | '+' => matches!(chars[i - 1], 'e' | 'E'),
                _ => false,
            };
            if !continues {
                break;
            }
            i += 1;
        }
        let token: String = chars[start..i].iter().collect();
        let parenthesized = start > 0 && chars[start - 1] == '(' && chars.get(i) == Some(&')');
        if let Some(v) = normalize_number(&token) {
            out.push(if parenthesized { -v } else { v });
        }
    }
    out
}
