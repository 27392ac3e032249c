//! Keyword normalization shared by table selection, retrieval and intent classification.

use std::collections::BTreeSet;

const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "across",
    "all",
    "an",
    "and",
    "are",
    "as",
    "at",
    "be",
    "between",
    "by",
    "chart",
    "compare",
    "comparing",
    "comparison",
    "data",
    "each",
    "for",
    "from",
    "how",
    "in",
    "into",
    "is",
    "it",
    "its",
    "of",
    "on",
    "or",
    "over",
    "per",
    "show",
    "showing",
    "the",
    "their",
    "this",
    "to",
    "visualize",
    "was",
    "were",
    "what",
    "which",
    "with",
];

/// Lowercased alphanumeric words with stopwords removed and a light plural strip.
pub fn keywords(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !STOPWORDS.contains(&w.as_str())).collect()
}

/// Lowercased, stemmed words with stopwords kept.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| stem(&w.to_lowercase())).collect()
}

pub fn keyword_set(text: &str) -> BTreeSet<String> {
    keywords(text).into_iter().collect()
}

fn stem(word: &str) -> String {
    if word.len() > 3 && word.ends_with("ies") {
        format!("{}y", &word[..word.len() - 3])
    } else if word.len() > 3
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.chars().all(|c| c.is_ascii_digit() || c == 's')
    {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

/// Number of distinct keywords shared by two texts.
pub fn overlap(a: &str, b: &str) -> usize {
    let left = keyword_set(a);
    keyword_set(b).intersection(&left).count()
}
