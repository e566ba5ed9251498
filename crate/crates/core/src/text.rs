//! Tokenization helpers shared by the reader, the categorizer and the
//! generator.

use std::collections::{BTreeSet, HashSet};

use crate::metrics::lower_without_punctuation;

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

pub const WH_WORDS: &[&str] = &["what", "which", "who", "whom", "whose", "where", "when", "why", "how"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords::parse(DEFAULT_STOPWORDS)
    }
}

/// A whitespace-delimited token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub raw: &'a str,
    pub start: usize,
    pub end: usize,
    /// Lowercased with punctuation removed; may be empty.
    pub norm: String,
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(make_token(text, s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(make_token(text, s, text.len()));
    }
    tokens
}

fn make_token(text: &str, start: usize, end: usize) -> Token<'_> {
    let raw = &text[start..end];
    Token {
        raw,
        start,
        end,
        norm: normalize_token(raw),
    }
}

/// Per-token normalization: lowercase and strip punctuation. Unlike
/// `normalize_answer` this keeps articles, so stopword filtering decides.
pub fn normalize_token(raw: &str) -> String {
    lower_without_punctuation(raw)
}

/// Light suffix stripping so inflected forms ("falls", "fall") compare equal.
pub fn stem(token: &str) -> String {
    let t = token;
    let n = t.chars().count();
    if n > 4 && t.ends_with("ies") {
        return format!("{}y", &t[..t.len() - 3]);
    }
    if n > 4 && t.ends_with("ied") {
        return format!("{}y", &t[..t.len() - 3]);
    }
    if n > 5 && t.ends_with("ing") {
        return t[..t.len() - 3].to_string();
    }
    if n > 4 && t.ends_with("ed") {
        return t[..t.len() - 2].to_string();
    }
    if n > 4 && (t.ends_with("ses") || t.ends_with("xes") || t.ends_with("ches") || t.ends_with("shes")) {
        return t[..t.len() - 2].to_string();
    }
    if n > 3 && t.ends_with('s') && !t.ends_with("ss") && !t.ends_with("us") {
        return t[..t.len() - 1].to_string();
    }
    t.to_string()
}

/// Stemmed, normalized tokens of `text` that are neither stopwords nor
/// wh-words.
pub fn content_tokens(text: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| is_content(&t.norm, stopwords))
        .map(|t| stem(&t.norm))
        .collect()
}

pub fn is_content(norm: &str, stopwords: &Stopwords) -> bool {
    !norm.is_empty() && !stopwords.contains(norm) && !WH_WORDS.contains(&norm)
}

/// Entity-like question tokens: capitalized or numeric content tokens,
/// normalized and stemmed. These are the nouns a distractor is supposed
/// to swap out.
pub fn content_nouns(question: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    tokenize(question)
        .into_iter()
        .filter(|t| is_content(&t.norm, stopwords))
        .filter(|t| {
            t.raw
                .chars()
                .find(|c| c.is_alphanumeric())
                .is_some_and(|c| c.is_uppercase() || c.is_numeric())
        })
        .map(|t| stem(&t.norm))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_spans() {
        let text = "  Café  «Zürich»\tnow ";
        let toks = tokenize(text);
        let raws: Vec<_> = toks.iter().map(|t| t.raw).collect();
        assert_eq!(raws, ["Café", "«Zürich»", "now"]);
        for t in &toks {
            assert_eq!(&text[t.start..t.end], t.raw);
        }
        assert_eq!(toks[1].norm, "zürich");
    }

    #[test]
    fn articles_survive_token_normalization() {
        assert_eq!(normalize_token("The"), "the");
        assert_eq!(normalize_token("(a)"), "a");
        assert_eq!(normalize_token("Siouan-speaking"), "siouanspeaking");
        assert_eq!(normalize_token("--"), "");
    }

    #[test]
    fn stemming() {
        assert_eq!(stem("falls"), stem("fall"));
        assert_eq!(stem("invented"), stem("invent"));
        assert_eq!(stem("tribes"), stem("tribe"));
        assert_eq!(stem("countries"), "country");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("is"), "is");
    }

    #[test]
    fn stopword_file_is_sizeable() {
        let sw = Stopwords::default();
        assert!(sw.len() >= 120);
        assert!(sw.contains("the") && sw.contains("what"));
    }

    #[test]
    fn content_nouns_are_entities() {
        let sw = Stopwords::default();
        let nouns = content_nouns("Rudyard Kipling was an influential spokesman for what?", &sw);
        assert_eq!(nouns.into_iter().collect::<Vec<_>>(), ["kipl", "rudyard"]);
        let nouns = content_nouns(
            "What is the name of the quarterback who was 38 in Super Bowl XXXIII?",
            &sw,
        );
        assert_eq!(nouns.into_iter().collect::<Vec<_>>(), ["38", "bowl", "super", "xxxiii"]);
    }
}
