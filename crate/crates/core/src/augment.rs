//! Build append-k / prepend-k datasets from a corpus and a record store.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{AdversarialRecord, RecordStore, SENTENCES_PER_RECORD};
use crate::corpus::{corpus_to_bytes, Article, CharIndex, Corpus, Paragraph, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Append,
    Prepend,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Append => "append",
            Placement::Prepend => "prepend",
        })
    }
}

impl FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "append" => Ok(Placement::Append),
            "prepend" => Ok(Placement::Prepend),
            other => Err(format!("unknown placement `{other}` (expected append or prepend)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            other => Err(format!("unknown split `{other}` (expected train or eval)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("record for question {question_id} was not accepted by quality control")]
    RecordRejected { question_id: String },
    #[error("k = {k} is out of range for {placement} (append allows 0..=5, prepend 1..=5)")]
    KOutOfRange { k: usize, placement: Placement },
    #[error("every question of {name} was dropped")]
    EmptyResult { name: String },
}

pub const MAX_K: usize = SENTENCES_PER_RECORD;

fn check_k(k: usize, placement: Placement) -> Result<(), AugmentError> {
    let min = match placement {
        Placement::Append => 0,
        Placement::Prepend => 1,
    };
    if k < min || k > MAX_K {
        return Err(AugmentError::KOutOfRange { k, placement });
    }
    Ok(())
}

/// `append-3`, `prepend-1`, `train-4`; prepend training sets are
/// `train-prepend-k`.
pub fn dataset_name(k: usize, placement: Placement, split: Split) -> String {
    match (split, placement) {
        (Split::Train, Placement::Append) => format!("train-{k}"),
        (Split::Train, Placement::Prepend) => format!("train-prepend-{k}"),
        (Split::Eval, p) => format!("{p}-{k}"),
    }
}

/// The eleven evaluation settings: append-0..5 and prepend-1..5.
pub fn standard_eval_settings() -> Vec<(usize, Placement)> {
    (0..=MAX_K)
        .map(|k| (k, Placement::Append))
        .chain((1..=MAX_K).map(|k| (k, Placement::Prepend)))
        .collect()
}

/// Attach the first `k` sentences of the record to one context. Offsets are
/// in characters, matching the corpus.
pub fn augment_example(
    context: &str,
    question: &Question,
    record: &AdversarialRecord,
    k: usize,
    placement: Placement,
) -> Result<(String, Question), AugmentError> {
    check_k(k, placement)?;
    if k == 0 {
        return Ok((context.to_string(), question.clone()));
    }
    if !record.is_accepted() || record.sentences.len() < k {
        return Err(AugmentError::RecordRejected {
            question_id: question.id.clone(),
        });
    }
    let block = record.sentences[..k].join(" ");
    let mut question = question.clone();
    let context = match placement {
        Placement::Append => format!("{context} {block}"),
        Placement::Prepend => {
            let shift = CharIndex::new(&block).char_len() + 1;
            for answer in &mut question.answers {
                answer.answer_start += shift;
            }
            format!("{block} {context}")
        }
    };
    Ok((context, question))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub corpus: Corpus,
    pub k: usize,
    pub placement: Placement,
    pub name: String,
    pub dropped_questions: usize,
}

impl AugmentedDataset {
    pub fn question_count(&self) -> usize {
        self.corpus.questions().count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        corpus_to_bytes(&self.corpus)
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// One augmented paragraph per surviving question, in source order.
/// With k = 0 the records are not consulted and nothing is dropped.
pub fn build_dataset(
    corpus: &Corpus,
    store: &RecordStore,
    k: usize,
    placement: Placement,
    split: Split,
) -> Result<AugmentedDataset, AugmentError> {
    check_k(k, placement)?;
    let name = dataset_name(k, placement, split);
    let mut articles = Vec::with_capacity(corpus.articles.len());
    let mut dropped = 0;
    for article in &corpus.articles {
        let jobs: Vec<(&Paragraph, &Question)> = article
            .paragraphs
            .iter()
            .flat_map(|p| p.questions.iter().map(move |q| (p, q)))
            .collect();
        let results: Vec<Option<Paragraph>> = jobs
            .par_iter()
            .map(|(p, q)| {
                if k == 0 {
                    return Some(Paragraph {
                        context: p.context.clone(),
                        questions: vec![(*q).clone()],
                    });
                }
                let record = store.get(&q.id)?;
                augment_example(&p.context, q, record, k, placement)
                    .ok()
                    .map(|(context, question)| Paragraph {
                        context,
                        questions: vec![question],
                    })
            })
            .collect();
        dropped += results.iter().filter(|r| r.is_none()).count();
        let paragraphs: Vec<Paragraph> = results.into_iter().flatten().collect();
        if !paragraphs.is_empty() {
            articles.push(Article {
                title: article.title.clone(),
                paragraphs,
            });
        }
    }
    if articles.is_empty() {
        return Err(AugmentError::EmptyResult { name });
    }
    Ok(AugmentedDataset {
        corpus: Corpus {
            articles,
            version: corpus.version.clone(),
        },
        k,
        placement,
        name,
        dropped_questions: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub name: String,
    pub k: usize,
    pub placement: Placement,
    pub questions: usize,
    pub dropped: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,k,placement,questions,dropped,sha256\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name, r.k, r.placement, r.questions, r.dropped, r.sha256
            ));
        }
        out
    }
}

pub fn dataset_manifest(datasets: &[AugmentedDataset]) -> Manifest {
    Manifest {
        rows: datasets
            .iter()
            .map(|d| ManifestRow {
                name: d.name.clone(),
                k: d.k,
                placement: d.placement,
                questions: d.question_count(),
                dropped: d.dropped_questions,
                sha256: d.content_hash(),
            })
            .collect(),
    }
}
