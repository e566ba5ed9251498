//! Template grammar that turns a wh-question into a declarative sentence
//! carrying a fake answer.
//!
//! Templates are tried in order; the first that matches wins:
//!
//! 1. `... <prep> what?`            → `... <prep> FAKE.`
//! 2. `How many N ...?`             → `FAKE N ...` or `S V FAKE N ...`
//! 3. `In what|which N aux S V ...?` → `S V ... in FAKE.`
//! 4. `Who ...?`
//! 5. `Where|When aux ...?`         → `S aux ... in FAKE.`
//! 6. `What|Which [N] ...?`
//!
//! Subjects of inverted questions are found with a small lexical
//! heuristic (capitalized runs, determiners, prepositions); anything the
//! heuristic cannot place is `Unsupported`.

use thiserror::Error;

use super::swap::Category;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("question shape not covered by the template grammar: {0:?}")]
pub struct Unsupported(pub String);

/// Which wh-form a question takes; decides the fake-answer category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhKind {
    What,
    Who,
    Where,
    When,
    HowMany,
    /// `In what year ...`, `What year ...`.
    WhatTime,
    /// `In what city ...`.
    WhatPlace,
    /// `... for what?`
    TrailingWhat,
}

impl WhKind {
    pub fn category(self) -> Category {
        match self {
            WhKind::Who => Category::Person,
            WhKind::Where | WhKind::WhatPlace => Category::Place,
            WhKind::When | WhKind::WhatTime => Category::Date,
            WhKind::HowMany => Category::Number,
            WhKind::What | WhKind::TrailingWhat => Category::CommonNoun,
        }
    }
}

const BE: &[&str] = &["is", "are", "was", "were"];
const DO: &[&str] = &["do", "does", "did"];
const HAVE: &[&str] = &["has", "have", "had"];
const MODAL: &[&str] = &[
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
];
const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "its", "their", "our", "my", "your", "some",
    "many", "most", "each", "every", "all", "both", "several",
];
const PRONOUNS: &[&str] = &["he", "she", "it", "they", "we", "you", "i", "one"];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "to", "for", "from", "by", "with", "about", "as", "into", "onto", "during", "after",
    "before", "between", "against", "through", "under", "over", "among", "within", "without", "like", "than", "since",
    "until", "near", "across", "behind", "beyond", "upon", "toward", "towards", "via", "per", "off",
];
const RELATIVES: &[&str] = &["that", "who", "which", "whom", "whose", "where", "when"];
const TIME_NOUNS: &[&str] = &[
    "year", "years", "decade", "century", "month", "day", "date", "period", "era", "season",
];
const PLACE_NOUNS: &[&str] = &[
    "city",
    "country",
    "state",
    "town",
    "region",
    "province",
    "continent",
    "county",
    "place",
    "location",
    "area",
    "nation",
    "island",
    "village",
];
const IRREGULAR_PARTICIPLES: &[&str] = &[
    "known",
    "born",
    "made",
    "called",
    "built",
    "held",
    "given",
    "taken",
    "found",
    "named",
    "seen",
    "written",
    "sold",
    "won",
    "led",
    "been",
    "done",
    "gone",
    "begun",
    "chosen",
    "spoken",
    "shown",
    "grown",
    "thrown",
    "drawn",
    "kept",
    "left",
    "lost",
    "paid",
    "sent",
    "spent",
    "told",
    "thought",
    "brought",
    "bought",
    "caught",
    "taught",
    "fought",
    "sought",
    "held",
    "heard",
    "meant",
    "met",
    "set",
    "put",
    "cut",
    "hit",
    "read",
    "run",
    "become",
    "come",
    "beaten",
    "broken",
    "driven",
    "eaten",
    "fallen",
    "forgotten",
    "frozen",
    "hidden",
    "ridden",
    "risen",
    "stolen",
    "sworn",
    "torn",
    "worn",
    "woken",
    "struck",
    "stuck",
    "hung",
    "laid",
    "lit",
    "bound",
    "founded",
    "located",
    "based",
    "used",
];
const IRREGULAR_PAST: &[(&str, &str)] = &[
    ("be", "was"),
    ("bear", "bore"),
    ("beat", "beat"),
    ("become", "became"),
    ("begin", "began"),
    ("bind", "bound"),
    ("bite", "bit"),
    ("bleed", "bled"),
    ("blow", "blew"),
    ("break", "broke"),
    ("bring", "brought"),
    ("build", "built"),
    ("buy", "bought"),
    ("catch", "caught"),
    ("choose", "chose"),
    ("come", "came"),
    ("cost", "cost"),
    ("cut", "cut"),
    ("dig", "dug"),
    ("do", "did"),
    ("draw", "drew"),
    ("drink", "drank"),
    ("drive", "drove"),
    ("eat", "ate"),
    ("fall", "fell"),
    ("feed", "fed"),
    ("feel", "felt"),
    ("fight", "fought"),
    ("find", "found"),
    ("flee", "fled"),
    ("fly", "flew"),
    ("forbid", "forbade"),
    ("forget", "forgot"),
    ("freeze", "froze"),
    ("get", "got"),
    ("give", "gave"),
    ("go", "went"),
    ("grow", "grew"),
    ("hang", "hung"),
    ("have", "had"),
    ("hear", "heard"),
    ("hide", "hid"),
    ("hit", "hit"),
    ("hold", "held"),
    ("hurt", "hurt"),
    ("keep", "kept"),
    ("know", "knew"),
    ("lay", "laid"),
    ("lead", "led"),
    ("leave", "left"),
    ("lend", "lent"),
    ("let", "let"),
    ("lie", "lay"),
    ("light", "lit"),
    ("lose", "lost"),
    ("make", "made"),
    ("mean", "meant"),
    ("meet", "met"),
    ("pay", "paid"),
    ("put", "put"),
    ("quit", "quit"),
    ("read", "read"),
    ("ride", "rode"),
    ("ring", "rang"),
    ("rise", "rose"),
    ("run", "ran"),
    ("say", "said"),
    ("see", "saw"),
    ("seek", "sought"),
    ("sell", "sold"),
    ("send", "sent"),
    ("set", "set"),
    ("shake", "shook"),
    ("shine", "shone"),
    ("shoot", "shot"),
    ("shut", "shut"),
    ("sing", "sang"),
    ("sink", "sank"),
    ("sit", "sat"),
    ("sleep", "slept"),
    ("speak", "spoke"),
    ("spend", "spent"),
    ("split", "split"),
    ("spread", "spread"),
    ("spring", "sprang"),
    ("stand", "stood"),
    ("steal", "stole"),
    ("stick", "stuck"),
    ("sting", "stung"),
    ("strike", "struck"),
    ("swear", "swore"),
    ("sweep", "swept"),
    ("swim", "swam"),
    ("swing", "swung"),
    ("take", "took"),
    ("teach", "taught"),
    ("tear", "tore"),
    ("tell", "told"),
    ("think", "thought"),
    ("throw", "threw"),
    ("understand", "understood"),
    ("wake", "woke"),
    ("wear", "wore"),
    ("weep", "wept"),
    ("win", "won"),
    ("wind", "wound"),
    ("write", "wrote"),
];

fn is_in(word: &str, set: &[&str]) -> bool {
    let w = word.to_lowercase();
    set.contains(&w.as_str())
}

fn is_aux(word: &str) -> bool {
    is_in(word, BE) || is_in(word, DO) || is_in(word, HAVE) || is_in(word, MODAL)
}

fn is_capitalized(word: &str) -> bool {
    word.chars()
        .find(|c| c.is_alphanumeric())
        .is_some_and(|c| c.is_uppercase() || c.is_numeric())
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

pub fn past_tense(verb: &str) -> String {
    let lower = verb.to_lowercase();
    if let Some((_, past)) = IRREGULAR_PAST.iter().find(|(base, _)| *base == lower) {
        return past.to_string();
    }
    let chars: Vec<char> = lower.chars().collect();
    let n = chars.len();
    if lower.ends_with('e') {
        return format!("{verb}d");
    }
    if n >= 2 && chars[n - 1] == 'y' && !is_vowel(chars[n - 2]) {
        return format!("{}ied", &verb[..verb.len() - 1]);
    }
    // Short consonant-vowel-consonant stems double the final consonant.
    if n == 3 || (n == 4 && !is_vowel(chars[0])) {
        let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
        if !is_vowel(a) && is_vowel(b) && !is_vowel(c) && !matches!(c, 'w' | 'x' | 'y') {
            return format!("{verb}{c}ed");
        }
    }
    format!("{verb}ed")
}

pub fn third_person(verb: &str) -> String {
    let lower = verb.to_lowercase();
    match lower.as_str() {
        "have" => return "has".into(),
        "do" => return "does".into(),
        "go" => return "goes".into(),
        "be" => return "is".into(),
        _ => {}
    }
    let chars: Vec<char> = lower.chars().collect();
    let n = chars.len();
    if ["s", "x", "z", "ch", "sh"].iter().any(|s| lower.ends_with(s)) {
        return format!("{verb}es");
    }
    if n >= 2 && chars[n - 1] == 'y' && !is_vowel(chars[n - 2]) {
        return format!("{}ies", &verb[..verb.len() - 1]);
    }
    format!("{verb}s")
}

fn inflect_for_do(aux: &str, verb: &str) -> String {
    match aux.to_lowercase().as_str() {
        "did" => past_tense(verb),
        "does" => third_person(verb),
        _ => verb.to_string(),
    }
}

fn is_participle(word: &str) -> bool {
    if is_capitalized(word) {
        return false;
    }
    let w = word.to_lowercase();
    IRREGULAR_PARTICIPLES.contains(&w.as_str()) || (w.len() > 4 && w.ends_with("ed"))
}

/// Tokens that can open a noun phrase after an inverted auxiliary.
fn starts_noun_phrase(word: &str) -> bool {
    is_capitalized(word) || is_in(word, DETERMINERS) || is_in(word, PRONOUNS)
}

/// Index of the main verb after an inverted do/modal auxiliary; the
/// subject is `words[..index]`.
fn find_verb(words: &[&str]) -> Option<usize> {
    if words.len() < 2 {
        return None;
    }
    if is_in(words[0], PRONOUNS) {
        return Some(1);
    }
    if is_capitalized(words[0]) {
        let mut i = 0;
        while i < words.len() {
            let w = words[i];
            let joiner = is_in(w, &["of", "the", "and", "de", "von", "van"])
                && words.get(i + 1).is_some_and(|n| is_capitalized(n));
            if !(is_capitalized(w) || joiner) {
                break;
            }
            i += 1;
        }
        return (i < words.len() && !is_in(words[i], PREPOSITIONS)).then_some(i);
    }
    let start = if is_in(words[0], DETERMINERS) { 1 } else { 0 };
    for j in (start + 1).max(1)..words.len() {
        let w = words[j];
        if is_capitalized(w) || is_in(w, PREPOSITIONS) || is_in(w, DETERMINERS) {
            continue;
        }
        let next = words.get(j + 1);
        let ends_phrase = match next {
            None => true,
            Some(n) => is_in(n, PREPOSITIONS) || is_in(n, DETERMINERS) || is_capitalized(n) || is_in(n, PRONOUNS),
        };
        if ends_phrase {
            return Some(j);
        }
    }
    None
}

/// Index of a participle following the subject of an inverted `be`.
fn find_participle(words: &[&str]) -> Option<usize> {
    for (j, w) in words.iter().enumerate().skip(1) {
        if is_in(w, RELATIVES) {
            return None;
        }
        if is_participle(w) {
            return Some(j);
        }
    }
    None
}

fn ends_with_preposition(words: &[&str]) -> bool {
    words.last().is_some_and(|w| is_in(w, PREPOSITIONS))
}

fn join(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn finish(body: String) -> String {
    let body = body.trim().trim_end_matches(['.', '?', '!', ' ']).to_string();
    let mut chars = body.chars();
    let mut out = match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    };
    out.push('.');
    out
}

fn wh(word: &str) -> Option<&'static str> {
    ["what", "which", "who", "where", "when", "how", "whom"]
        .into_iter()
        .find(|w| word.eq_ignore_ascii_case(w))
}

/// Classify the question's wh-form without converting it.
pub fn wh_kind(question: &str) -> Option<WhKind> {
    let words = split_question(question)?;
    let first = words[0].to_lowercase();
    let second = words.get(1).map(|w| w.to_lowercase()).unwrap_or_default();
    match first.as_str() {
        "who" | "whom" => Some(WhKind::Who),
        "where" => Some(WhKind::Where),
        "when" => Some(WhKind::When),
        "how" if second == "many" => Some(WhKind::HowMany),
        "in" | "on" | "at" | "during" if matches!(second.as_str(), "what" | "which") => {
            let noun = words.get(2).map(|w| w.to_lowercase()).unwrap_or_default();
            if is_in(&noun, TIME_NOUNS) {
                Some(WhKind::WhatTime)
            } else {
                Some(WhKind::WhatPlace)
            }
        }
        "what" | "which" => {
            if is_in(&second, TIME_NOUNS) {
                Some(WhKind::WhatTime)
            } else if is_in(&second, PLACE_NOUNS) {
                Some(WhKind::WhatPlace)
            } else {
                Some(WhKind::What)
            }
        }
        _ if words.last().is_some_and(|w| w.eq_ignore_ascii_case("what")) => Some(WhKind::TrailingWhat),
        _ => None,
    }
}

fn split_question(question: &str) -> Option<Vec<&str>> {
    let trimmed = question.trim().trim_end_matches(['?', ' ']);
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    (!words.is_empty()).then_some(words)
}

/// Convert a (swapped) question into a statement that answers it with
/// `fake_answer`.
pub fn question_to_statement(question: &str, fake_answer: &str) -> Result<String, Unsupported> {
    let unsupported = || Unsupported(question.to_string());
    let words = split_question(question).ok_or_else(unsupported)?;
    let fake = fake_answer.trim();
    if fake.is_empty() {
        return Err(unsupported());
    }
    let first = words[0].to_lowercase();

    // 1. "... for what?"
    if wh(&first).is_none() {
        let last = words.last().unwrap();
        if last.eq_ignore_ascii_case("what") && words.len() >= 3 {
            return Ok(finish(join(&[&words[..words.len() - 1].join(" "), fake])));
        }
        if !matches!(first.as_str(), "in" | "on" | "at" | "during") {
            return Err(unsupported());
        }
    }

    match first.as_str() {
        "how" => how_many(&words, fake).ok_or_else(unsupported),
        "in" | "on" | "at" | "during" => prep_what(&words, fake).ok_or_else(unsupported),
        "who" | "whom" => who(&words[1..], fake).ok_or_else(unsupported),
        "where" | "when" => inverted_with_adjunct(&words[1..], &format!("in {fake}")).ok_or_else(unsupported),
        "what" | "which" => what(&words[1..], fake).ok_or_else(unsupported),
        _ => Err(unsupported()),
    }
}

/// `aux S ...` with the answer as a trailing adjunct ("in 1998").
fn inverted_with_adjunct(rest: &[&str], adjunct: &str) -> Option<String> {
    let (aux, tail) = rest.split_first()?;
    if !is_aux(aux) || tail.is_empty() {
        return None;
    }
    if is_in(aux, BE) {
        let (subject, remainder) = match find_participle(tail) {
            Some(j) => tail.split_at(j),
            None => (tail, &[][..]),
        };
        return Some(finish(join(&[&subject.join(" "), aux, &remainder.join(" "), adjunct])));
    }
    let v = find_verb(tail)?;
    let (subject, remainder) = tail.split_at(v);
    let verb_phrase = if is_in(aux, DO) {
        let mut r = remainder.to_vec();
        let inflected = inflect_for_do(aux, r[0]);
        r[0] = &inflected;
        join(&[&subject.join(" "), &r.join(" "), adjunct])
    } else {
        join(&[&subject.join(" "), aux, &remainder.join(" "), adjunct])
    };
    Some(finish(verb_phrase))
}

/// `aux S V ...` with the answer as the object.
fn inverted_with_object(rest: &[&str], object: &str) -> Option<String> {
    let (aux, tail) = rest.split_first()?;
    if !is_aux(aux) || tail.is_empty() {
        return None;
    }
    if is_in(aux, BE) {
        let j = find_participle(tail)?;
        let (subject, remainder) = tail.split_at(j);
        return Some(finish(place_object(&[&subject.join(" "), aux], remainder, object)));
    }
    let v = find_verb(tail)?;
    let (subject, remainder) = tail.split_at(v);
    if is_in(aux, DO) {
        let inflected = inflect_for_do(aux, remainder[0]);
        let mut verb = vec![inflected.as_str()];
        verb.extend_from_slice(&remainder[1..]);
        Some(finish(place_object(&[&subject.join(" ")], &verb, object)))
    } else {
        Some(finish(place_object(&[&subject.join(" "), aux], remainder, object)))
    }
}

/// Put the object after the verb, or at the end when the question strands
/// a preposition ("worked for ___").
fn place_object(head: &[&str], verb_phrase: &[&str], object: &str) -> String {
    let head = join(head);
    if ends_with_preposition(verb_phrase) || verb_phrase.len() <= 1 {
        join(&[&head, &verb_phrase.join(" "), object])
    } else {
        join(&[&head, verb_phrase[0], object, &verb_phrase[1..].join(" ")])
    }
}

fn how_many(words: &[&str], fake: &str) -> Option<String> {
    if words.len() < 4 || !words[1].eq_ignore_ascii_case("many") {
        return None;
    }
    let rest = &words[2..];
    let aux_at = rest.iter().position(|w| is_aux(w))?;
    if aux_at == 0 || aux_at > 4 {
        return None;
    }
    let noun = rest[..aux_at].join(" ");
    let after = &rest[aux_at..];
    let inverted = after.len() > 1 && (is_in(after[0], DO) || starts_noun_phrase(after[1]));
    if inverted {
        inverted_with_object(after, &format!("{fake} {noun}"))
    } else {
        Some(finish(join(&[fake, &rest.join(" ")])))
    }
}

fn prep_what(words: &[&str], fake: &str) -> Option<String> {
    if words.len() < 5 || !matches!(words[1].to_lowercase().as_str(), "what" | "which") {
        return None;
    }
    let prep = words[0].to_lowercase();
    let aux_at = words[2..].iter().position(|w| is_aux(w))? + 2;
    if aux_at > 5 {
        return None;
    }
    inverted_with_adjunct(&words[aux_at..], &format!("{prep} {fake}"))
}

fn who(rest: &[&str], fake: &str) -> Option<String> {
    let (first, tail) = rest.split_first()?;
    if tail.is_empty() {
        return None;
    }
    if is_aux(first) {
        if is_in(first, DO) || (!is_in(first, BE) && starts_noun_phrase(tail[0])) {
            return inverted_with_object(rest, fake);
        }
        if is_in(first, BE) && starts_noun_phrase(tail[0]) {
            if ends_with_preposition(tail) {
                if let Some(s) = inverted_with_object(rest, fake) {
                    return Some(s);
                }
            }
            return Some(finish(join(&[fake, first, &tail.join(" ")])));
        }
    }
    Some(finish(join(&[fake, &rest.join(" ")])))
}

/// Past-tense or third-person-singular shape.
fn looks_finite(word: &str) -> bool {
    let w = word.to_lowercase();
    let n = w.chars().count();
    IRREGULAR_PAST.iter().any(|(_, past)| *past == w)
        || (n > 3 && w.ends_with("ed"))
        || (n > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us"))
}

fn what(rest: &[&str], fake: &str) -> Option<String> {
    let (first, tail) = rest.split_first()?;
    if is_in(first, BE) {
        if tail.is_empty() {
            return None;
        }
        // "What was Tesla known for?" / "What are committees ... compared to ...?"
        if let Some(j) = find_participle(tail) {
            let (subject, remainder) = tail.split_at(j);
            if ends_with_preposition(remainder) {
                return Some(finish(join(&[&subject.join(" "), first, &remainder.join(" "), fake])));
            }
            return Some(finish(join(&[&subject.join(" "), first, fake, &remainder.join(" ")])));
        }
        return Some(finish(join(&[&tail.join(" "), first, fake])));
    }
    if is_in(first, DO) || is_in(first, MODAL) {
        return inverted_with_object(rest, fake);
    }
    // "What N [N N] aux ..."
    let noun_len = rest
        .iter()
        .take(4)
        .position(|w| is_aux(w))
        .filter(|&i| i > 0 && !rest[..i].iter().any(|w| is_in(w, RELATIVES)));
    if let Some(n) = noun_len {
        let noun = &rest[..n];
        let after = &rest[n..];
        let head_noun = noun.last().copied().unwrap_or_default();
        if is_in(head_noun, TIME_NOUNS) || is_in(head_noun, PLACE_NOUNS) {
            if let Some(s) = inverted_with_adjunct(after, &format!("in {fake}")) {
                return Some(s);
            }
        }
        let inverted = after.len() > 1 && (is_in(after[0], DO) || starts_noun_phrase(after[1]));
        if inverted {
            return inverted_with_object(after, fake);
        }
        return Some(finish(join(&[fake, &after.join(" ")])));
    }
    if tail.is_empty() {
        return None;
    }
    // "Which city hosted ...?" drops the wh-noun; "What causes ...?" keeps
    // the verb.
    if looks_finite(tail[0]) && !looks_finite(first) {
        return Some(finish(join(&[fake, &tail.join(" ")])));
    }
    Some(finish(join(&[fake, &rest.join(" ")])))
}
