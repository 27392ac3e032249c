use serde::Serialize;

use super::EvalError;

/// Tokens of a source string with their byte spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenizedText {
    pub source: String,
    pub tokens: Vec<String>,
    /// Byte ranges into `source`, one per token.
    pub char_spans: Vec<(usize, usize)>,
}

impl TokenizedText {
    /// Check the span invariants: non-empty, ordered, non-overlapping (a span
    /// may repeat its predecessor exactly, as sub-word tokenizers emit for
    /// split characters), in bounds and on character boundaries.
    pub fn new(
        source: impl Into<String>,
        tokens: Vec<String>,
        char_spans: Vec<(usize, usize)>,
    ) -> Result<Self, EvalError> {
        let source = source.into();
        if tokens.is_empty() {
            return Err(EvalError::InvalidTokens("token list is empty".into()));
        }
        if tokens.len() != char_spans.len() {
            return Err(EvalError::ShapeMismatch(format!("{} tokens but {} spans", tokens.len(), char_spans.len())));
        }
        let mut prev: Option<(usize, usize)> = None;
        for (i, &(start, end)) in char_spans.iter().enumerate() {
            if start > end || end > source.len() || !source.is_char_boundary(start) || !source.is_char_boundary(end) {
                return Err(EvalError::InvalidTokens(format!("span {i} ({start}, {end}) is out of bounds")));
            }
            if let Some(p) = prev {
                if p != (start, end) && start < p.1 {
                    return Err(EvalError::InvalidTokens(format!("span {i} overlaps its predecessor")));
                }
            }
            prev = Some((start, end));
        }
        Ok(Self { source, tokens, char_spans })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Source text from the start of token `first` to the end of token `last`.
    pub fn text_between(&self, first: usize, last: usize) -> &str {
        &self.source[self.char_spans[first].0..self.char_spans[last].1]
    }
}

/// Split text into number, word and punctuation tokens.
///
/// Numbers keep their thousands separators and decimal point (`1,234.5` is one
/// token) and take a leading minus when it does not follow a word character.
pub fn tokenize(text: &str) -> Vec<(String, (usize, usize))> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |k: usize| chars.get(k).map_or(text.len(), |c| c.0);
    let digit_at = |k: usize| chars.get(k).is_some_and(|c| c.1.is_ascii_digit());
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let after_word = i > 0 && chars[i - 1].1.is_alphanumeric();
        let signed = (c == '-' || c == '\u{2212}') && digit_at(i + 1) && !after_word;
        if c.is_ascii_digit() || signed {
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                if d.is_ascii_digit() || ((d == ',' || d == '.') && digit_at(i + 1)) {
                    i += 1;
                } else {
                    break;
                }
            }
            if i + 1 < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let sign = matches!(chars[i + 1].1, '+' | '-');
                let exp_start = i + 1 + usize::from(sign);
                if digit_at(exp_start) {
                    i = exp_start;
                    while digit_at(i) {
                        i += 1;
                    }
                }
            }
            if i < chars.len() && chars[i].1.is_alphabetic() {
                // Digits running into letters ("3rd", "10x") form one word.
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
            }
        } else if c.is_alphanumeric() || c == '_' {
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
        } else {
            i += 1;
        }
        let (s, e) = (chars[start].0, end_of(i));
        out.push((text[s..e].to_string(), (s, e)));
    }
    out
}

/// Tokenize into a [`TokenizedText`]; `None` for text without tokens.
pub fn tokenized(text: &str) -> Option<TokenizedText> {
    let (tokens, spans): (Vec<String>, Vec<(usize, usize)>) = tokenize(text).into_iter().unzip();
    TokenizedText::new(text, tokens, spans).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.0).collect()
    }

    #[test]
    fn numbers_stay_whole() {
        assert_eq!(toks("| 1,234.5 | -3 |"), ["|", "1,234.5", "|", "-3", "|"]);
        assert_eq!(toks("\"y\":-0.25}"), ["\"", "y", "\"", ":", "-0.25", "}"]);
        assert_eq!(toks("2021-2022"), ["2021", "-", "2022"]);
        assert_eq!(toks("Q1 revenue, 12."), ["Q1", "revenue", ",", "12", "."]);
        assert_eq!(toks("\"y\":1.5e-7,"), ["\"", "y", "\"", ":", "1.5e-7", ","]);
        assert_eq!(toks("3rd 10em"), ["3rd", "10em"]);
    }

    #[test]
    fn spans_index_source() {
        let text = "Umsatz \u{20ac} 1.5";
        for (tok, (s, e)) in tokenize(text) {
            assert_eq!(&text[s..e], tok);
        }
    }

    #[test]
    fn invariants() {
        assert!(TokenizedText::new("ab", vec!["a".into(), "b".into()], vec![(0, 1), (1, 2)]).is_ok());
        assert!(TokenizedText::new("ab", vec!["a".into(), "a".into()], vec![(0, 1), (0, 1)]).is_ok());
        assert!(TokenizedText::new("ab", vec!["ab".into(), "b".into()], vec![(0, 2), (1, 2)]).is_err());
        assert!(TokenizedText::new("ab", vec!["x".into()], vec![(0, 3)]).is_err());
        assert!(TokenizedText::new("ab", vec![], vec![]).is_err());
    }
}
