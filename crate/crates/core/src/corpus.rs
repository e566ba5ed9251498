//! SQuAD v1.1 corpus model: loading with strict span validation, writing,
//! and size statistics.
//!
//! Answer offsets are counted in Unicode scalar values (`char`s), the same
//! unit used to slice contexts when checking spans.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("span mismatch for question {question_id}: expected {expected:?}, found {found:?}")]
    SpanMismatch {
        question_id: String,
        expected: String,
        found: String,
    },
    #[error("duplicate question id {0}")]
    DuplicateQuestionId(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub answer_start: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub answers: Vec<GoldAnswer>,
    #[serde(rename = "question")]
    pub text: String,
    pub id: String,
}

impl Question {
    pub fn gold_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    #[serde(rename = "qas")]
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    #[serde(rename = "data")]
    pub articles: Vec<Article>,
    pub version: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub article_count: usize,
    pub paragraph_count: usize,
    pub question_count: usize,
}

/// Why a question was dropped by a lenient load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedQuestion {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop questions that fail validation instead of failing the load.
    /// Structural problems are still hard errors.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    pub dropped: Vec<DroppedQuestion>,
}

impl Corpus {
    pub fn empty(version: impl Into<String>) -> Self {
        Corpus {
            articles: Vec::new(),
            version: version.into(),
        }
    }

    /// Iterate over every (paragraph, question) pair in document order.
    pub fn questions(&self) -> impl Iterator<Item = (&Paragraph, &Question)> {
        self.articles
            .iter()
            .flat_map(|a| a.paragraphs.iter())
            .flat_map(|p| p.questions.iter().map(move |q| (p, q)))
    }

    pub fn find_question(&self, id: &str) -> Option<(&Paragraph, &Question)> {
        self.questions().find(|(_, q)| q.id == id)
    }

    /// Check every corpus invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for (ai, article) in self.articles.iter().enumerate() {
            if article.title.is_empty() {
                return Err(schema(format!("data[{ai}].title"), "title is empty"));
            }
            for (pi, paragraph) in article.paragraphs.iter().enumerate() {
                if paragraph.context.is_empty() {
                    return Err(schema(
                        format!("data[{ai}].paragraphs[{pi}].context"),
                        "context is empty",
                    ));
                }
                let index = CharIndex::new(&paragraph.context);
                for (qi, question) in paragraph.questions.iter().enumerate() {
                    let path = format!("data[{ai}].paragraphs[{pi}].qas[{qi}]");
                    check_question(question, &index, &path)?;
                    if !seen.insert(question.id.as_str()) {
                        return Err(CorpusError::DuplicateQuestionId(question.id.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn schema(path: String, message: impl Into<String>) -> CorpusError {
    CorpusError::SchemaViolation {
        path,
        message: message.into(),
    }
}

fn check_question(question: &Question, index: &CharIndex<'_>, path: &str) -> Result<(), CorpusError> {
    if question.text.is_empty() {
        return Err(schema(format!("{path}.question"), "question text is empty"));
    }
    if question.answers.is_empty() {
        return Err(schema(format!("{path}.answers"), "answer list is empty"));
    }
    for answer in &question.answers {
        let found = index
            .slice(answer.answer_start, answer.text.chars().count())
            .unwrap_or("");
        if found != answer.text {
            return Err(CorpusError::SpanMismatch {
                question_id: question.id.clone(),
                expected: answer.text.clone(),
                found: found.to_string(),
            });
        }
    }
    Ok(())
}

/// Byte positions of every char boundary, for char-offset slicing.
pub struct CharIndex<'a> {
    text: &'a str,
    bounds: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bounds.push(text.len());
        CharIndex { text, bounds }
    }

    pub fn char_len(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Slice `len` chars starting at char offset `start`.
    pub fn slice(&self, start: usize, len: usize) -> Option<&'a str> {
        let end = start.checked_add(len)?;
        if end > self.char_len() {
            return None;
        }
        Some(&self.text[self.bounds[start]..self.bounds[end]])
    }

    pub fn byte_to_char(&self, byte: usize) -> usize {
        self.bounds.partition_point(|&b| b < byte)
    }
}

/// Slice a string by char offsets; `None` when out of range.
pub fn char_slice(text: &str, start: usize, len: usize) -> Option<&str> {
    CharIndex::new(text).slice(start, len)
}

pub fn load_corpus<R: Read>(source: R) -> Result<Corpus, CorpusError> {
    load_corpus_with(source, LoadOptions::default()).map(|o| o.corpus)
}

pub fn load_corpus_with<R: Read>(mut source: R, options: LoadOptions) -> Result<LoadOutcome, CorpusError> {
    let mut raw = String::new();
    source.read_to_string(&mut raw)?;
    let doc: Value = serde_json::from_str(&raw).map_err(|e| CorpusError::MalformedDocument {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut dropped = Vec::new();
    let mut seen = HashSet::new();

    let top = as_object(&doc, "$")?;
    let version = match top.get("version") {
        Some(v) => as_str(v, "$.version")?.to_string(),
        None => return Err(schema("$.version".into(), "missing field")),
    };
    let data = as_array(field(top, "data", "$")?, "$.data")?;

    let mut articles = Vec::with_capacity(data.len());
    for (ai, article) in data.iter().enumerate() {
        let apath = format!("$.data[{ai}]");
        let aobj = as_object(article, &apath)?;
        let title = as_str(field(aobj, "title", &apath)?, &format!("{apath}.title"))?;
        if title.is_empty() {
            return Err(schema(format!("{apath}.title"), "title is empty"));
        }
        let paras = as_array(field(aobj, "paragraphs", &apath)?, &format!("{apath}.paragraphs"))?;
        let mut paragraphs = Vec::with_capacity(paras.len());
        for (pi, para) in paras.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{pi}]");
            let pobj = as_object(para, &ppath)?;
            let context = as_str(field(pobj, "context", &ppath)?, &format!("{ppath}.context"))?;
            if context.is_empty() {
                return Err(schema(format!("{ppath}.context"), "context is empty"));
            }
            let index = CharIndex::new(context);
            let qas = as_array(field(pobj, "qas", &ppath)?, &format!("{ppath}.qas"))?;
            let mut questions = Vec::with_capacity(qas.len());
            for (qi, qa) in qas.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{qi}]");
                let question = parse_question(qa, &qpath)?;
                let verdict = check_question(&question, &index, &qpath).and_then(|_| {
                    if seen.contains(&question.id) {
                        Err(CorpusError::DuplicateQuestionId(question.id.clone()))
                    } else {
                        Ok(())
                    }
                });
                match verdict {
                    Ok(()) => {
                        seen.insert(question.id.clone());
                        questions.push(question);
                    }
                    Err(err) if options.lenient => dropped.push(DroppedQuestion {
                        question_id: question.id.clone(),
                        reason: err.to_string(),
                    }),
                    Err(err) => return Err(err),
                }
            }
            paragraphs.push(Paragraph {
                context: context.to_string(),
                questions,
            });
        }
        articles.push(Article {
            title: title.to_string(),
            paragraphs,
        });
    }
    Ok(LoadOutcome {
        corpus: Corpus { articles, version },
        dropped,
    })
}

fn parse_question(value: &Value, path: &str) -> Result<Question, CorpusError> {
    let obj = as_object(value, path)?;
    let id = as_str(field(obj, "id", path)?, &format!("{path}.id"))?;
    let text = as_str(field(obj, "question", path)?, &format!("{path}.question"))?;
    let raw_answers = as_array(field(obj, "answers", path)?, &format!("{path}.answers"))?;
    let mut answers = Vec::with_capacity(raw_answers.len());
    for (i, a) in raw_answers.iter().enumerate() {
        let apath = format!("{path}.answers[{i}]");
        let aobj = as_object(a, &apath)?;
        let text = as_str(field(aobj, "text", &apath)?, &format!("{apath}.text"))?;
        let start = field(aobj, "answer_start", &apath)?
            .as_u64()
            .ok_or_else(|| schema(format!("{apath}.answer_start"), "expected a non-negative integer"))?;
        answers.push(GoldAnswer {
            answer_start: start as usize,
            text: text.to_string(),
        });
    }
    Ok(Question {
        answers,
        text: text.to_string(),
        id: id.to_string(),
    })
}

fn field<'v>(obj: &'v serde_json::Map<String, Value>, name: &str, path: &str) -> Result<&'v Value, CorpusError> {
    obj.get(name)
        .ok_or_else(|| schema(format!("{path}.{name}"), "missing field"))
}

fn as_object<'v>(v: &'v Value, path: &str) -> Result<&'v serde_json::Map<String, Value>, CorpusError> {
    v.as_object()
        .ok_or_else(|| schema(path.to_string(), "expected an object"))
}

fn as_array<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>, CorpusError> {
    v.as_array()
        .ok_or_else(|| schema(path.to_string(), "expected an array"))
}

fn as_str<'v>(v: &'v Value, path: &str) -> Result<&'v str, CorpusError> {
    v.as_str().ok_or_else(|| schema(path.to_string(), "expected a string"))
}

/// Serialize in the compact layout of the public SQuAD files.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut sink: W) -> Result<(), CorpusError> {
    serde_json::to_writer(&mut sink, corpus).map_err(std::io::Error::from)?;
    sink.flush()?;
    Ok(())
}

pub fn corpus_to_bytes(corpus: &Corpus) -> Vec<u8> {
    serde_json::to_vec(corpus).expect("corpus serialization is infallible")
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        article_count: corpus.articles.len(),
        ..Default::default()
    };
    for article in &corpus.articles {
        stats.paragraph_count += article.paragraphs.len();
        stats.question_count += article.paragraphs.iter().map(|p| p.questions.len()).sum::<usize>();
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn precipitation() -> &'static str {
        r#"{"version": "1.1", "data": [{"title": "Precipitation", "paragraphs": [
            {"context": "In meteorology, precipitation is any product of the condensation of atmospheric water vapor that falls under gravity.",
             "qas": [{"id": "q1", "question": "What causes precipitation to fall?", "answers": [{"text": "gravity", "answer_start": 109}]}]},
            {"context": "The main forms of precipitation include drizzle, rain, sleet, snow, graupel and hail.",
             "qas": [{"id": "q2", "question": "What is another main form of precipitation besides drizzle, rain, snow, sleet and hail?", "answers": [{"text": "graupel", "answer_start": 68}]},
                     {"id": "q3", "question": "What is a main form of precipitation?", "answers": [{"text": "rain", "answer_start": 49}, {"text": "snow", "answer_start": 62}]}]}
        ]}]}"#
    }

    #[test]
    fn stats_on_small_fixture() {
        let corpus = load_corpus(precipitation().as_bytes()).unwrap();
        assert_eq!(
            corpus_stats(&corpus),
            CorpusStats {
                article_count: 1,
                paragraph_count: 2,
                question_count: 3
            }
        );
    }

    #[test]
    fn empty_article_list() {
        let corpus = load_corpus(r#"{"version":"1.1","data":[]}"#.as_bytes()).unwrap();
        assert_eq!(corpus_stats(&corpus), CorpusStats::default());
        let mut out = Vec::new();
        write_corpus(&corpus, &mut out).unwrap();
        let back = load_corpus(out.as_slice()).unwrap();
        assert_eq!(corpus_stats(&back), CorpusStats::default());
    }

    #[test]
    fn off_by_one_offset_is_span_mismatch() {
        let doc = precipitation().replace("\"answer_start\": 109", "\"answer_start\": 110");
        match load_corpus(doc.as_bytes()) {
            Err(CorpusError::SpanMismatch {
                question_id, expected, ..
            }) => {
                assert_eq!(question_id, "q1");
                assert_eq!(expected, "gravity");
            }
            other => panic!("expected span mismatch, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = precipitation().replace("\"id\": \"q3\"", "\"id\": \"q2\"");
        assert!(matches!(
            load_corpus(doc.as_bytes()),
            Err(CorpusError::DuplicateQuestionId(id)) if id == "q2"
        ));
    }

    #[test]
    fn lenient_drops_and_counts() {
        let doc = precipitation()
            .replace("\"answer_start\": 109", "\"answer_start\": 7")
            .replace("\"id\": \"q3\"", "\"id\": \"q2\"");
        let outcome = load_corpus_with(doc.as_bytes(), LoadOptions { lenient: true }).unwrap();
        assert_eq!(corpus_stats(&outcome.corpus).question_count, 1);
        let ids: Vec<_> = outcome.dropped.iter().map(|d| d.question_id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2"]);
    }

    #[test]
    fn missing_field_reports_path() {
        let doc = precipitation().replace("\"question\": \"What causes", "\"query\": \"What causes");
        match load_corpus(doc.as_bytes()) {
            Err(CorpusError::SchemaViolation { path, .. }) => {
                assert_eq!(path, "$.data[0].paragraphs[0].qas[0].question")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_failure_has_location() {
        let err = load_corpus("{\"version\": \"1.1\",\n \"data\": [,]}".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedDocument { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn offsets_count_chars_not_bytes() {
        let doc = r#"{"version":"1.1","data":[{"title":"Zürich","paragraphs":[{"context":"Café in Zürich serves crème brûlée.","qas":[{"id":"u1","question":"What does the café serve?","answers":[{"text":"crème brûlée","answer_start":22}]}]}]}]}"#;
        let corpus = load_corpus(doc.as_bytes()).unwrap();
        assert_eq!(corpus_stats(&corpus).question_count, 1);
    }

    #[test]
    fn writer_uses_squad_key_layout() {
        let corpus = load_corpus(precipitation().as_bytes()).unwrap();
        let text = String::from_utf8(corpus_to_bytes(&corpus)).unwrap();
        assert!(text.starts_with(r#"{"data":[{"title":"Precipitation","paragraphs":[{"context":"#));
        assert!(text.contains(r#"{"answers":[{"answer_start":109,"text":"gravity"}],"question":"What causes precipitation to fall?","id":"q1"}"#));
        assert!(text.ends_with(r#""version":"1.1"}"#));
    }
}
