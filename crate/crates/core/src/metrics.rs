//! SQuAD v1.1 answer normalization, exact match, token F1 and report
//! aggregation.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

static ARTICLES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(a|an|the)\b").unwrap());

/// Every char in a Unicode `P*` category, plus the ASCII punctuation set
/// (which also covers the `$+<=>^`|~` symbols).
pub(crate) fn is_punctuation(c: char) -> bool {
    static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{P}$").unwrap());
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    let mut buf = [0u8; 4];
    PUNCT.is_match(c.encode_utf8(&mut buf))
}

pub(crate) fn lower_without_punctuation(text: &str) -> String {
    text.to_lowercase().chars().filter(|c| !is_punctuation(*c)).collect()
}

/// Lowercase, strip punctuation, drop articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let no_punct = lower_without_punctuation(text);
    let no_articles = ARTICLES.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn exact_match<S: AsRef<str>>(prediction: &str, golds: &[S]) -> u8 {
    let pred = normalize_answer(prediction);
    golds.iter().any(|g| normalize_answer(g.as_ref()) == pred).into()
}

fn f1_against(pred_tokens: &[&str], gold: &str) -> f64 {
    let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
    if pred_tokens.is_empty() && gold_tokens.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold_tokens {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred_tokens {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    // 2pr/(p+r) reduces to 2o/(|pred|+|gold|); one division keeps it exact
    // to the nearest double.
    (2 * overlap) as f64 / (pred_tokens.len() + gold_tokens.len()) as f64
}

/// Maximum token-level F1 over the gold answers.
pub fn token_f1<S: AsRef<str>>(prediction: &str, golds: &[S]) -> f64 {
    let pred = normalize_answer(prediction);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    golds
        .iter()
        .map(|g| f1_against(&pred_tokens, &normalize_answer(g.as_ref())))
        .fold(0.0, f64::max)
}

/// Question id to predicted answer, the flat shape the official evaluator reads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionSet(pub BTreeMap<String, String>);

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, answer: impl Into<String>) {
        self.0.insert(id.into(), answer.into());
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("prediction sets always serialize")
    }

    /// Replay the first gold answer of every question.
    pub fn from_gold(corpus: &Corpus) -> Self {
        let mut set = PredictionSet::new();
        for (_, q) in corpus.questions() {
            set.insert(q.id.clone(), q.answers[0].text.clone());
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub exact_match: u8,
    pub f1: f64,
    /// `None` when no prediction was supplied for this question.
    pub prediction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub prediction_set_name: String,
    pub scores: Vec<QuestionScore>,
    pub mean_em: f64,
    pub mean_f1: f64,
    pub missing_predictions: usize,
    /// Predictions whose id is not in the gold corpus.
    pub unknown_predictions: usize,
}

impl EvalReport {
    pub fn question_count(&self) -> usize {
        self.scores.len()
    }

    /// Means of the stored per-question scores, as percentages.
    pub fn recompute_means(scores: &[QuestionScore]) -> (f64, f64) {
        if scores.is_empty() {
            return (0.0, 0.0);
        }
        let n = scores.len() as f64;
        let em: u64 = scores.iter().map(|s| s.exact_match as u64).sum();
        let f1: f64 = scores.iter().map(|s| s.f1).sum();
        (100.0 * em as f64 / n, 100.0 * f1 / n)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("reports always serialize")
    }

    pub fn to_csv(&self) -> String {
        format!(
            "dataset,predictions,questions,missing,exact_match,f1\n{},{},{},{},{:.1},{:.1}\n",
            csv_field(&self.dataset_name),
            csv_field(&self.prediction_set_name),
            self.question_count(),
            self.missing_predictions,
            self.mean_em,
            self.mean_f1
        )
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn score_predictions(
    predictions: &PredictionSet,
    gold: &Corpus,
    dataset_name: &str,
    prediction_set_name: &str,
) -> EvalReport {
    let mut scores = Vec::new();
    let mut missing = 0;
    let mut known = 0;
    for (_, question) in gold.questions() {
        let golds = question.gold_texts();
        let score = match predictions.get(&question.id) {
            Some(pred) => {
                known += 1;
                QuestionScore {
                    question_id: question.id.clone(),
                    exact_match: exact_match(pred, &golds),
                    f1: token_f1(pred, &golds),
                    prediction: Some(pred.to_string()),
                }
            }
            None => {
                missing += 1;
                QuestionScore {
                    question_id: question.id.clone(),
                    exact_match: 0,
                    f1: 0.0,
                    prediction: None,
                }
            }
        };
        scores.push(score);
    }
    let (mean_em, mean_f1) = EvalReport::recompute_means(&scores);
    EvalReport {
        dataset_name: dataset_name.to_string(),
        prediction_set_name: prediction_set_name.to_string(),
        scores,
        mean_em,
        mean_f1,
        missing_predictions: missing,
        unknown_predictions: predictions.len() - known,
    }
}
