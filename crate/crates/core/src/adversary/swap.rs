use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STARTER_TABLE: &str = include_str!("../../data/swap_table.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Person,
    Place,
    Organization,
    Number,
    Date,
    CommonNoun,
    Adjective,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Person,
        Category::Place,
        Category::Organization,
        Category::Number,
        Category::Date,
        Category::CommonNoun,
        Category::Adjective,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Person => "person",
            Category::Place => "place",
            Category::Organization => "organization",
            Category::Number => "number",
            Category::Date => "date",
            Category::CommonNoun => "common-noun",
            Category::Adjective => "adjective",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = SwapTableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| SwapTableError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SwapTableError {
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("entry {0:?} has no analogues")]
    EmptyAnalogues(String),
    #[error("entry {0:?} lists itself as an analogue")]
    SelfAnalogue(String),
    #[error("term {0:?} appears more than once")]
    DuplicateTerm(String),
    #[error("empty term")]
    EmptyTerm,
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("invalid swap table json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEntry {
    pub term: String,
    pub category: Category,
    pub analogues: Vec<String>,
}

/// Surface terms mapped to same-category analogues, indexed for
/// longest-match lookup by first word.
#[derive(Debug, Clone)]
pub struct SwapTable {
    entries: Vec<SwapEntry>,
    by_first_word: HashMap<String, Vec<usize>>,
    by_term: HashMap<String, usize>,
}

fn lower(s: &str) -> String {
    s.to_lowercase()
}

fn first_word(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())
        .map(lower)
        .unwrap_or_default()
}

impl SwapTable {
    pub fn new(entries: Vec<SwapEntry>) -> Result<Self, SwapTableError> {
        let mut by_term = HashMap::new();
        let mut by_first_word: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            if entry.term.trim().is_empty() {
                return Err(SwapTableError::EmptyTerm);
            }
            if entry.analogues.is_empty() {
                return Err(SwapTableError::EmptyAnalogues(entry.term.clone()));
            }
            let key = lower(&entry.term);
            if entry.analogues.iter().any(|a| lower(a) == key) {
                return Err(SwapTableError::SelfAnalogue(entry.term.clone()));
            }
            if by_term.insert(key, i).is_some() {
                return Err(SwapTableError::DuplicateTerm(entry.term.clone()));
            }
            by_first_word.entry(first_word(&entry.term)).or_default().push(i);
        }
        for idxs in by_first_word.values_mut() {
            idxs.sort_by_key(|&i| std::cmp::Reverse(entries[i].term.chars().count()));
        }
        Ok(SwapTable {
            entries,
            by_first_word,
            by_term,
        })
    }

    pub fn starter() -> Self {
        SwapTable::from_json(STARTER_TABLE).expect("bundled swap table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SwapTableError> {
        SwapTable::new(serde_json::from_str(text)?)
    }

    /// Tab-separated `term<TAB>category<TAB>analogue|analogue|...`.
    pub fn from_tsv(text: &str) -> Result<Self, SwapTableError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(SwapTableError::BadLine {
                    line: n + 1,
                    message: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            entries.push(SwapEntry {
                term: cols[0].trim().to_string(),
                category: cols[1].parse()?,
                analogues: cols[2]
                    .split('|')
                    .map(str::trim)
                    .filter(|a| !a.is_empty())
                    .map(String::from)
                    .collect(),
            });
        }
        SwapTable::new(entries)
    }

    /// JSON when the text starts with `[`, otherwise TSV.
    pub fn parse(text: &str) -> Result<Self, SwapTableError> {
        if text.trim_start().starts_with('[') {
            SwapTable::from_json(text)
        } else {
            SwapTable::from_tsv(text)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("entries serialize")
    }

    pub fn entries(&self) -> &[SwapEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-insensitive exact lookup of a whole term.
    pub fn lookup(&self, term: &str) -> Option<&SwapEntry> {
        self.by_term.get(&lower(term.trim())).map(|&i| &self.entries[i])
    }

    /// Every term and analogue of a category, deduplicated and sorted.
    pub fn terms_in(&self, category: Category) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.category == category)
            .flat_map(|e| std::iter::once(&e.term).chain(e.analogues.iter()))
            .filter(|t| seen.insert(lower(t)))
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// Longest entry matching `chars[pos..]` at word boundaries.
    fn match_at(&self, chars: &[char], pos: usize) -> Option<(usize, usize)> {
        let word: String = chars[pos..]
            .iter()
            .take_while(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let candidates = self.by_first_word.get(&word)?;
        for &i in candidates {
            let term: Vec<char> = self.entries[i].term.chars().collect();
            let end = pos + term.len();
            if end > chars.len() {
                continue;
            }
            let same = chars[pos..end]
                .iter()
                .zip(&term)
                .all(|(a, b)| a.to_lowercase().eq(b.to_lowercase()));
            let boundary = end == chars.len() || !chars[end].is_alphanumeric();
            if same && boundary {
                return Some((i, end));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub original: String,
    pub replacement: String,
    pub category: Category,
}

/// Replace every table term (and every bare number) in the question with
/// an analogue. `pick(n)` chooses an index in `0..n`.
pub fn swap_nouns_with(question: &str, table: &SwapTable, pick: &mut dyn FnMut(usize) -> usize) -> (String, Vec<Swap>) {
    let chars: Vec<char> = question.chars().collect();
    let mut out = String::with_capacity(question.len());
    let mut log = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let at_boundary = pos == 0 || !chars[pos - 1].is_alphanumeric();
        if at_boundary && chars[pos].is_alphanumeric() {
            if let Some((i, end)) = table.match_at(&chars, pos) {
                let entry = &table.entries[i];
                let replacement = entry.analogues[pick(entry.analogues.len())].clone();
                out.push_str(&replacement);
                log.push(Swap {
                    original: chars[pos..end].iter().collect(),
                    replacement,
                    category: entry.category,
                });
                pos = end;
                continue;
            }
            if chars[pos].is_ascii_digit() {
                let end = pos + chars[pos..].iter().take_while(|c| c.is_ascii_digit()).count();
                let trailing_alpha = end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '.');
                if !trailing_alpha {
                    let original: String = chars[pos..end].iter().collect();
                    if let Some((replacement, category)) = perturb_number(&original, pick) {
                        out.push_str(&replacement);
                        log.push(Swap {
                            original,
                            replacement,
                            category,
                        });
                        pos = end;
                        continue;
                    }
                }
            }
        }
        out.push(chars[pos]);
        pos += 1;
    }
    (out, log)
}

pub fn swap_nouns<R: Rng + ?Sized>(question: &str, table: &SwapTable, rng: &mut R) -> (String, Vec<Swap>) {
    swap_nouns_with(question, table, &mut |n| rng.random_range(0..n))
}

/// Numeric analogues for a bare integer: years shift by up to 15, other
/// numbers by up to 9, never to themselves or below zero.
pub fn number_analogues(digits: &str) -> Option<(Vec<String>, Category)> {
    if digits.len() > 9 {
        return None;
    }
    let n: i64 = digits.parse().ok()?;
    let (span, category) = if digits.len() == 4 && (1000..=2100).contains(&n) {
        (15, Category::Date)
    } else {
        (9, Category::Number)
    };
    let candidates: Vec<String> = (1..=span)
        .flat_map(|d| [n + d, n - d])
        .filter(|&v| v >= 0)
        .map(|v| v.to_string())
        .collect();
    Some((candidates, category))
}

fn perturb_number(digits: &str, pick: &mut dyn FnMut(usize) -> usize) -> Option<(String, Category)> {
    let (candidates, category) = number_analogues(digits)?;
    Some((candidates[pick(candidates.len())].clone(), category))
}

/// Group a swap log by category, for diagnostics.
pub fn swaps_by_category(log: &[Swap]) -> BTreeMap<Category, Vec<&Swap>> {
    let mut map: BTreeMap<Category, Vec<&Swap>> = BTreeMap::new();
    for s in log {
        map.entry(s.category).or_default().push(s);
    }
    map
}
