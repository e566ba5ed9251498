//! Lexical-overlap extractive reader. Picks the sentence sharing the most
//! content tokens with the question, then the longest stretch of that
//! sentence the question does not mention.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::metrics::{is_punctuation, PredictionSet};
use crate::text::{content_tokens, is_content, stem, tokenize, Stopwords, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReaderConfig {
    pub stopwords: Stopwords,
    pub max_answer_tokens: usize,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            stopwords: Stopwords::default(),
            max_answer_tokens: 10,
        }
    }
}

/// Byte spans of sentences ending at `.`, `?` or `!` followed by
/// whitespace, trimmed.
pub fn split_sentences(context: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = context.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') && chars.peek().is_some_and(|(_, n)| n.is_whitespace()) {
            push_trimmed(context, start, i + c.len_utf8(), &mut spans);
            start = i + c.len_utf8();
        }
    }
    push_trimmed(context, start, context.len(), &mut spans);
    spans
}

fn push_trimmed(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let piece = &text[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        spans.push((start + lead, start + lead + trimmed.len()));
    }
}

pub fn predict(question: &str, context: &str, config: &ReaderConfig) -> String {
    let sentences = split_sentences(context);
    let Some(&first) = sentences.first() else {
        return String::new();
    };
    let q_tokens = content_tokens(question, &config.stopwords);

    let mut best = (0, first);
    for &(s, e) in &sentences {
        let overlap = content_tokens(&context[s..e], &config.stopwords)
            .intersection(&q_tokens)
            .count();
        if overlap > 0 && overlap >= best.0 {
            best = (overlap, (s, e));
        }
    }
    let (s, e) = best.1;
    let sentence = &context[s..e];
    if best.0 == 0 {
        return sentence.to_string();
    }
    match best_run(sentence, &q_tokens, config) {
        Some((a, b)) => trim_punctuation(&sentence[a..b]).to_string(),
        None => sentence.to_string(),
    }
}

/// Longest run of tokens outside the question, at most `max_answer_tokens`
/// long, with function words and bare punctuation trimmed from both ends.
/// Later runs win ties.
fn best_run(sentence: &str, q_tokens: &BTreeSet<String>, config: &ReaderConfig) -> Option<(usize, usize)> {
    let tokens = tokenize(sentence);
    let in_question = |t: &Token| is_content(&t.norm, &config.stopwords) && q_tokens.contains(&stem(&t.norm));
    let is_filler = |t: &Token| !is_content(&t.norm, &config.stopwords);
    let max = config.max_answer_tokens.max(1);

    let mut best: Option<(usize, usize, usize)> = None;
    let mut i = 0;
    while i < tokens.len() {
        if in_question(&tokens[i]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < tokens.len() && !in_question(&tokens[j]) {
            j += 1;
        }
        let mut run = &tokens[i..j];
        while run.first().is_some_and(is_filler) {
            run = &run[1..];
        }
        if run.len() > max {
            run = &run[..max];
        }
        while run.last().is_some_and(is_filler) {
            run = &run[..run.len() - 1];
        }
        if !run.is_empty() && best.is_none_or(|(len, _, _)| run.len() >= len) {
            best = Some((run.len(), run[0].start, run[run.len() - 1].end));
        }
        i = j;
    }
    best.map(|(_, a, b)| (a, b))
}

fn trim_punctuation(span: &str) -> &str {
    let trimmed = span.trim_matches(is_punctuation);
    if trimmed.is_empty() {
        span
    } else {
        trimmed
    }
}

pub fn predict_dataset(corpus: &Corpus, config: &ReaderConfig) -> PredictionSet {
    let jobs: Vec<(&str, &str, &str)> = corpus
        .questions()
        .map(|(p, q)| (q.id.as_str(), q.text.as_str(), p.context.as_str()))
        .collect();
    let answers: Vec<(String, String)> = jobs
        .par_iter()
        .map(|(id, q, ctx)| (id.to_string(), predict(q, ctx, config)))
        .collect();
    let mut set = PredictionSet::new();
    for (id, a) in answers {
        set.insert(id, a);
    }
    set
}
