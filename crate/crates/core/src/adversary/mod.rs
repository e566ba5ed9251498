//! Rule-based distractor generation: swap the question's nouns, restate it
//! as a declarative sentence carrying a fake answer, and quality-filter the
//! result.

pub mod statement;
pub mod swap;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Question};
use crate::metrics::normalize_answer;

pub use statement::{question_to_statement, wh_kind, Unsupported, WhKind};
pub use swap::{swap_nouns, swap_nouns_with, Category, Swap, SwapEntry, SwapTable, SwapTableError};

/// Every accepted record carries exactly this many distractors.
pub const SENTENCES_PER_RECORD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RuleBased,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    WrongCount,
    ContainsGoldAnswer,
    TemplateUnsupported,
    InsufficientDistinctSentences,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::WrongCount => "wrong_count",
            RejectReason::ContainsGoldAnswer => "contains_gold_answer",
            RejectReason::TemplateUnsupported => "template_unsupported",
            RejectReason::InsufficientDistinctSentences => "insufficient_distinct_sentences",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcVerdict {
    Accepted,
    Rejected(RejectReason),
}

impl QcVerdict {
    pub fn is_accepted(self) -> bool {
        self == QcVerdict::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialRecord {
    pub question_id: String,
    pub sentences: Vec<String>,
    pub fake_answers: Vec<String>,
    pub provenance: Provenance,
    pub qc: QcVerdict,
}

impl AdversarialRecord {
    pub fn is_accepted(&self) -> bool {
        self.qc.is_accepted()
    }

    fn rejected(question_id: &str, provenance: Provenance, reason: RejectReason) -> Self {
        AdversarialRecord {
            question_id: question_id.to_string(),
            sentences: Vec::new(),
            fake_answers: Vec::new(),
            provenance,
            qc: QcVerdict::Rejected(reason),
        }
    }
}

/// True when the normalized gold is empty or occurs inside the normalized
/// sentence.
pub fn contains_gold<S: AsRef<str>>(sentence: &str, golds: &[S]) -> bool {
    let s = normalize_answer(sentence);
    golds.iter().any(|g| {
        let g = normalize_answer(g.as_ref());
        g.is_empty() || s.contains(&g)
    })
}

/// Accept exactly five sentences, none of which contains a gold answer.
pub fn qc_filter<S: AsRef<str>, G: AsRef<str>>(sentences: &[S], golds: &[G]) -> QcVerdict {
    if sentences.len() != SENTENCES_PER_RECORD {
        return QcVerdict::Rejected(RejectReason::WrongCount);
    }
    if golds.is_empty() || sentences.iter().any(|s| contains_gold(s.as_ref(), golds)) {
        return QcVerdict::Rejected(RejectReason::ContainsGoldAnswer);
    }
    QcVerdict::Accepted
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub rng_seed: u64,
    pub swap_table: SwapTable,
    pub max_template_attempts: usize,
}

impl GenerationConfig {
    pub fn new(rng_seed: u64, swap_table: SwapTable) -> Self {
        GenerationConfig {
            rng_seed,
            swap_table,
            max_template_attempts: 64,
        }
    }
}

/// Per-question RNG keyed by (seed, question id), independent of the order
/// questions are processed in.
pub fn question_rng(seed: u64, question_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(question_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Candidate fake answers: analogues of the gold when the table knows it,
/// otherwise every table term of the category implied by the wh-word.
pub fn fake_answer_pool(golds: &[&str], kind: WhKind, table: &SwapTable) -> Vec<String> {
    let from_table = golds.iter().find_map(|g| table.lookup(g));
    let mut pool = match from_table {
        Some(entry) => entry.analogues.clone(),
        None => {
            let category = kind.category();
            let numeric = golds
                .iter()
                .find(|g| !g.is_empty() && g.chars().all(|c| c.is_ascii_digit()));
            match (category, numeric) {
                (Category::Number | Category::Date, Some(n)) => {
                    swap::number_analogues(n).map(|(c, _)| c).unwrap_or_default()
                }
                _ => table.terms_in(category),
            }
        }
    };
    let norm_golds: Vec<String> = golds.iter().map(|g| normalize_answer(g)).collect();
    pool.retain(|candidate| {
        let c = normalize_answer(candidate);
        !c.is_empty()
            && norm_golds
                .iter()
                .all(|g| !g.is_empty() && !c.contains(g.as_str()) && !g.contains(c.as_str()))
    });
    pool
}

/// Largest choice list any single draw for this question can face.
fn widest_choice(question: &str, table: &SwapTable, pool: usize) -> usize {
    let mut widest = pool;
    swap_nouns_with(question, table, &mut |n| {
        widest = widest.max(n);
        0
    });
    widest.max(1)
}

pub fn generate_record(question: &Question, gold_answers: &[&str], config: &GenerationConfig) -> AdversarialRecord {
    let id = question.id.as_str();
    let reject = |reason| AdversarialRecord::rejected(id, Provenance::RuleBased, reason);
    let Some(kind) = wh_kind(&question.text) else {
        return reject(RejectReason::TemplateUnsupported);
    };
    if question_to_statement(&question.text, "X").is_err() {
        return reject(RejectReason::TemplateUnsupported);
    }
    let table = &config.swap_table;
    let pool = fake_answer_pool(gold_answers, kind, table);
    if pool.is_empty() {
        return reject(RejectReason::InsufficientDistinctSentences);
    }

    let mut rng = question_rng(config.rng_seed, id);
    // First pass walks a shuffled shared index through every choice list,
    // keeping parallel analogue lists aligned; later passes draw freely.
    let width = widest_choice(&question.text, table, pool.len());
    let mut order: Vec<usize> = (0..width).collect();
    order.shuffle(&mut rng);

    let mut sentences: Vec<String> = Vec::new();
    let mut fakes: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut dirty = HashSet::new();
    for attempt in 0..config.max_template_attempts {
        let shared = order.get(attempt).copied();
        let mut pick = |n: usize| match shared {
            Some(i) => i % n,
            None => rng.random_range(0..n),
        };
        let (swapped, _log) = swap_nouns_with(&question.text, table, &mut pick);
        let fake = pool[pick(pool.len())].clone();
        let Ok(sentence) = question_to_statement(&swapped, &fake) else {
            continue;
        };
        if contains_gold(&sentence, gold_answers) {
            dirty.insert(sentence);
            continue;
        }
        if seen.insert(sentence.clone()) {
            sentences.push(sentence);
            fakes.push(fake);
            if sentences.len() == SENTENCES_PER_RECORD {
                break;
            }
        }
    }

    if sentences.len() < SENTENCES_PER_RECORD {
        let reason = if !dirty.is_empty() && sentences.len() + dirty.len() >= SENTENCES_PER_RECORD {
            RejectReason::ContainsGoldAnswer
        } else {
            RejectReason::InsufficientDistinctSentences
        };
        return AdversarialRecord {
            question_id: id.to_string(),
            sentences,
            fake_answers: fakes,
            provenance: Provenance::RuleBased,
            qc: QcVerdict::Rejected(reason),
        };
    }
    let qc = qc_filter(&sentences, gold_answers);
    AdversarialRecord {
        question_id: id.to_string(),
        sentences,
        fake_answers: fakes,
        provenance: Provenance::RuleBased,
        qc,
    }
}

/// Generate a record for every question of the corpus. Runs on the
/// current rayon pool; output order never depends on scheduling.
pub fn generate_store(corpus: &Corpus, config: &GenerationConfig) -> RecordStore {
    let questions: Vec<&Question> = corpus.questions().map(|(_, q)| q).collect();
    let records: Vec<AdversarialRecord> = questions
        .par_iter()
        .map(|q| generate_record(q, &q.gold_texts(), config))
        .collect();
    let mut store = RecordStore::default();
    for r in records {
        store.insert(r);
    }
    store
}

#[derive(Serialize, Deserialize)]
struct RecordBody {
    sentences: Vec<String>,
    fake_answers: Vec<String>,
    provenance: Provenance,
    qc: QcVerdict,
}

/// All records for one corpus, keyed by question id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordStore {
    records: BTreeMap<String, AdversarialRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StoreSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl RecordStore {
    pub fn insert(&mut self, record: AdversarialRecord) {
        self.records.insert(record.question_id.clone(), record);
    }

    pub fn get(&self, question_id: &str) -> Option<&AdversarialRecord> {
        self.records.get(question_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AdversarialRecord> {
        self.records.values()
    }

    pub fn summary(&self) -> StoreSummary {
        let mut summary = StoreSummary {
            total: self.records.len(),
            ..Default::default()
        };
        for r in self.records.values() {
            match r.qc {
                QcVerdict::Accepted => summary.accepted += 1,
                QcVerdict::Rejected(reason) => *summary.rejected.entry(reason).or_default() += 1,
            }
        }
        summary
    }

    pub fn to_json(&self) -> Vec<u8> {
        let bodies: BTreeMap<&str, RecordBody> = self
            .records
            .iter()
            .map(|(id, r)| {
                (
                    id.as_str(),
                    RecordBody {
                        sentences: r.sentences.clone(),
                        fake_answers: r.fake_answers.clone(),
                        provenance: r.provenance,
                        qc: r.qc,
                    },
                )
            })
            .collect();
        serde_json::to_vec_pretty(&bodies).expect("records serialize")
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        let bodies: BTreeMap<String, RecordBody> = serde_json::from_slice(bytes)?;
        let records = bodies
            .into_iter()
            .map(|(id, b)| {
                let record = AdversarialRecord {
                    question_id: id.clone(),
                    sentences: b.sentences,
                    fake_answers: b.fake_answers,
                    provenance: b.provenance,
                    qc: b.qc,
                };
                (id, record)
            })
            .collect();
        Ok(RecordStore { records })
    }
}

impl FromIterator<AdversarialRecord> for RecordStore {
    fn from_iter<I: IntoIterator<Item = AdversarialRecord>>(iter: I) -> Self {
        let mut store = RecordStore::default();
        for r in iter {
            store.insert(r);
        }
        store
    }
}
