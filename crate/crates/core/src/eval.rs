//! Evaluation matrices over (prediction source, dataset) pairs and
//! automatic categorization of wrong answers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversarialRecord, RecordStore};
use crate::corpus::Corpus;
use crate::metrics::{csv_field, normalize_answer, score_predictions, EvalReport, PredictionSet};
use crate::text::{content_nouns, content_tokens, Stopwords};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unsupported export format `{0}` (expected json, csv or markdown)")]
    UnsupportedFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixMetadata {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub toolkit_version: String,
    /// Dataset name to content hash.
    pub manifest_hashes: BTreeMap<String, String>,
}

impl MatrixMetadata {
    pub fn at(timestamp: u64, manifest_hashes: BTreeMap<String, String>) -> Self {
        MatrixMetadata {
            timestamp,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_hashes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub row: String,
    pub column: String,
    pub mean_em: f64,
    pub mean_f1: f64,
    pub question_count: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<MatrixCell>,
    pub metadata: MatrixMetadata,
}

/// One requested cell: score `predictions` against `dataset`.
#[derive(Debug, Clone, Copy)]
pub struct CellInput<'a> {
    pub row: &'a str,
    pub column: &'a str,
    pub predictions: &'a PredictionSet,
    pub dataset: &'a Corpus,
}

fn push_unique(list: &mut Vec<String>, name: &str) {
    if !list.iter().any(|n| n == name) {
        list.push(name.to_string());
    }
}

/// Score every cell. Rows and columns keep first-seen order; cells keep
/// input order.
pub fn run_matrix(inputs: &[CellInput<'_>], metadata: MatrixMetadata) -> MatrixReport {
    let cells: Vec<MatrixCell> = inputs
        .par_iter()
        .map(|c| {
            let report = score_predictions(c.predictions, c.dataset, c.column, c.row);
            MatrixCell {
                row: c.row.to_string(),
                column: c.column.to_string(),
                mean_em: report.mean_em,
                mean_f1: report.mean_f1,
                question_count: report.question_count(),
                report,
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut columns = Vec::new();
    for c in inputs {
        push_unique(&mut rows, c.row);
        push_unique(&mut columns, c.column);
    }
    MatrixReport {
        rows,
        columns,
        cells,
        metadata,
    }
}

/// Every prediction set against every dataset.
pub fn run_cross(
    prediction_sets: &[(String, PredictionSet)],
    datasets: &[(String, Corpus)],
    metadata: MatrixMetadata,
) -> MatrixReport {
    let inputs: Vec<CellInput<'_>> = prediction_sets
        .iter()
        .flat_map(|(row, predictions)| {
            datasets.iter().map(move |(column, dataset)| CellInput {
                row,
                column,
                predictions,
                dataset,
            })
        })
        .collect();
    run_matrix(&inputs, metadata)
}

impl MatrixReport {
    pub fn cell(&self, row: &str, column: &str) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    /// Cells whose stored aggregates differ from the means recomputed from
    /// their per-question scores.
    pub fn inconsistent_cells(&self) -> Vec<(&str, &str)> {
        self.cells
            .iter()
            .filter(|c| {
                let (em, f1) = EvalReport::recompute_means(&c.report.scores);
                em != c.mean_em || f1 != c.mean_f1 || c.question_count != c.report.scores.len()
            })
            .map(|c| (c.row.as_str(), c.column.as_str()))
            .collect()
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ExportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "markdown" | "md" | "markdown-table" => Ok(ExportFormat::Markdown),
            other => Err(EvalError::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn export_report(report: &MatrixReport, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => serde_json::to_vec_pretty(report).expect("matrix serializes"),
        ExportFormat::Csv => {
            let mut out = String::from("row,column,questions,exact_match,f1\n");
            for c in &report.cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(&c.row),
                    csv_field(&c.column),
                    c.question_count,
                    c.mean_em,
                    c.mean_f1
                );
            }
            out.into_bytes()
        }
        ExportFormat::Markdown => {
            let mut out = String::new();
            for (title, pick) in [("F1", true), ("EM", false)] {
                let _ = writeln!(out, "### {title}\n");
                let _ = writeln!(out, "| model | {} |", report.columns.join(" | "));
                let _ = writeln!(out, "|---|{}", "---:|".repeat(report.columns.len()));
                for row in &report.rows {
                    let values: Vec<String> = report
                        .columns
                        .iter()
                        .map(|col| match report.cell(row, col) {
                            Some(c) => format!("{:.1}", if pick { c.mean_f1 } else { c.mean_em }),
                            None => "n/a".to_string(),
                        })
                        .collect();
                    let _ = writeln!(out, "| {row} | {} |", values.join(" | "));
                }
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

/// Export by format name; unknown names are an error.
pub fn export_report_named(report: &MatrixReport, format: &str) -> Result<Vec<u8>, EvalError> {
    Ok(export_report(report, format.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    AdversarialSpanNounOverlap,
    AdversarialSpan,
    Granularity,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::AdversarialSpanNounOverlap,
        ErrorCategory::AdversarialSpan,
        ErrorCategory::Granularity,
        ErrorCategory::Other,
    ];
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::AdversarialSpanNounOverlap => "adversarial_span_noun_overlap",
            ErrorCategory::AdversarialSpan => "adversarial_span",
            ErrorCategory::Granularity => "granularity",
            ErrorCategory::Other => "other",
        })
    }
}

/// Assign a wrong prediction to the first matching bucket:
/// a distractor span whose sentence still shares an entity noun with the
/// question, any other distractor span, a gold/prediction containment, or
/// anything else.
pub fn categorize_error(
    prediction: &str,
    golds: &[&str],
    distractors: &[&str],
    question_nouns: &BTreeSet<String>,
    stopwords: &Stopwords,
) -> ErrorCategory {
    let pred = normalize_answer(prediction);
    if pred.is_empty() {
        return ErrorCategory::Other;
    }
    let hits: Vec<&str> = distractors
        .iter()
        .copied()
        .filter(|d| normalize_answer(d).contains(&pred))
        .collect();
    if hits.iter().any(|d| {
        content_tokens(d, stopwords)
            .intersection(question_nouns)
            .next()
            .is_some()
    }) {
        return ErrorCategory::AdversarialSpanNounOverlap;
    }
    if !hits.is_empty() {
        return ErrorCategory::AdversarialSpan;
    }
    let granular = golds.iter().any(|g| {
        let g = normalize_answer(g);
        !g.is_empty() && (pred.contains(&g) || g.contains(&pred))
    });
    if granular {
        ErrorCategory::Granularity
    } else {
        ErrorCategory::Other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question_id: String,
    pub question: String,
    pub prediction: String,
    pub golds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub total_errors: usize,
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub percentages: BTreeMap<ErrorCategory, f64>,
    pub exemplars: BTreeMap<ErrorCategory, Vec<Exemplar>>,
}

impl ErrorBreakdown {
    pub fn count(&self, category: ErrorCategory) -> usize {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("breakdown serializes")
    }
}

/// Sentences of the record that actually appear in the context.
fn inserted_distractors<'a>(record: Option<&'a AdversarialRecord>, context: &str) -> Vec<&'a str> {
    record
        .map(|r| {
            r.sentences
                .iter()
                .map(String::as_str)
                .filter(|s| context.contains(s))
                .collect()
        })
        .unwrap_or_default()
}

/// Categorize every em = 0 question of the report. Exemplars are the first
/// `exemplars_per_category` errors of each bucket by question id.
pub fn error_breakdown(
    report: &EvalReport,
    dataset: &Corpus,
    store: &RecordStore,
    stopwords: &Stopwords,
    exemplars_per_category: usize,
) -> ErrorBreakdown {
    let lookup: BTreeMap<&str, (&str, &crate::corpus::Question)> = dataset
        .questions()
        .map(|(p, q)| (q.id.as_str(), (p.context.as_str(), q)))
        .collect();
    let mut errors: Vec<(ErrorCategory, Exemplar)> = report
        .scores
        .iter()
        .filter(|s| s.exact_match == 0)
        .filter_map(|s| {
            let (context, question) = lookup.get(s.question_id.as_str())?;
            let prediction = s.prediction.clone().unwrap_or_default();
            let golds = question.gold_texts();
            let distractors = inserted_distractors(store.get(&question.id), context);
            let nouns = content_nouns(&question.text, stopwords);
            let category = categorize_error(&prediction, &golds, &distractors, &nouns, stopwords);
            Some((
                category,
                Exemplar {
                    question_id: question.id.clone(),
                    question: question.text.clone(),
                    prediction,
                    golds: golds.iter().map(|g| g.to_string()).collect(),
                },
            ))
        })
        .collect();
    errors.sort_by(|a, b| a.1.question_id.cmp(&b.1.question_id));

    let total = errors.len();
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut exemplars: BTreeMap<ErrorCategory, Vec<Exemplar>> =
        ErrorCategory::ALL.iter().map(|c| (*c, Vec::new())).collect();
    for (category, exemplar) in errors {
        *counts.entry(category).or_default() += 1;
        let bucket = exemplars.entry(category).or_default();
        if bucket.len() < exemplars_per_category {
            bucket.push(exemplar);
        }
    }
    let percentages = counts
        .iter()
        .map(|(c, n)| {
            let pct = if total == 0 {
                0.0
            } else {
                100.0 * *n as f64 / total as f64
            };
            (*c, pct)
        })
        .collect();
    ErrorBreakdown {
        total_errors: total,
        counts,
        percentages,
        exemplars,
    }
}
