use serde_json::Value;

use super::LlmError;

/// Pull the first balanced top-level JSON object out of a model response,
/// tolerating code fences and surrounding prose.
pub fn parse_json_payload(text: &str) -> Result<Value, LlmError> {
    let mut first_error = None;
    let mut search_from = 0;
    while let Some(offset) = text[search_from..].find('{') {
        let start = search_from + offset;
        match balanced_end(&text[start..]) {
            Some(len) => match serde_json::from_str::<Value>(&text[start..start + len]) {
                Ok(value) => return Ok(value),
                Err(e) => {
                    first_error.get_or_insert_with(|| e.to_string());
                }
            },
            None => {
                first_error.get_or_insert_with(|| "unbalanced braces".to_string());
            }
        }
        search_from = start + 1;
    }
    match first_error {
        Some(e) => Err(LlmError::JsonSyntax(e)),
        None => Err(LlmError::NoJsonFound),
    }
}

/// Byte length of the brace-balanced prefix starting at `s[0] == '{'`,
/// respecting JSON string literals.
fn balanced_end(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn fenced() {
        assert_eq!(parse_json_payload("```json\n{\"a\":1}\n```").unwrap(), json!({"a": 1}));
    }

    #[test]
    fn prose_prefix() {
        assert_eq!(parse_json_payload("Here is the result: {\"a\":1}").unwrap(), json!({"a": 1}));
    }

    #[test]
    fn none() {
        assert_eq!(parse_json_payload("no json here"), Err(LlmError::NoJsonFound));
    }

    #[test]
    fn braces_inside_strings() {
        let v = parse_json_payload(r#"ok {"a":"}{","b":{"c":[1]}} trailing }"#).unwrap();
        assert_eq!(v, json!({"a": "}{", "b": {"c": [1]}}));
    }

    #[test]
    fn skips_non_json_braces() {
        assert_eq!(parse_json_payload("use {x} then {\"a\":2}").unwrap(), json!({"a": 2}));
    }

    #[test]
    fn syntax_error() {
        assert!(matches!(parse_json_payload("{\"a\":}"), Err(LlmError::JsonSyntax(_))));
    }
}
