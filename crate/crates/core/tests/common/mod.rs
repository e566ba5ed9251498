// Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use advqa::adversary::{AdversarialRecord, Category, Provenance, QcVerdict, RecordStore, SwapTable};
use advqa::corpus::{load_corpus, Article, Corpus, GoldAnswer, Paragraph, Question};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn attack_corpus() -> Corpus {
    load_corpus(std::fs::File::open(fixture_path("attack_corpus.json")).unwrap()).unwrap()
}

pub fn attack_table() -> SwapTable {
    SwapTable::parse(&std::fs::read_to_string(fixture_path("attack_swap_table.json")).unwrap()).unwrap()
}

const FILLERS: &[&str] = &[
    "Visitors from Zürich and São Paulo praise its café.",
    "Locals call it 東京の宝 in guidebooks.",
    "The façade was restored after the storm.",
    "A naïve sketch of it hangs in the Musée d'Orsay 🎨.",
    "Its archive holds letters in Ελληνικά and Русский.",
    "Tourists rarely notice the old bell.",
];

const BUILDINGS: &[&str] = &[
    "bridge",
    "museum",
    "library",
    "cathedral",
    "stadium",
    "tower",
    "harbor",
    "palace",
];

struct Fact {
    question: String,
    before: String,
    answer: String,
    after: String,
}

fn char_offset(haystack: &str, byte: usize) -> usize {
    haystack[..byte].chars().count()
}

fn fact<R: Rng>(rng: &mut R, people: &[String], places: &[String], numbers: &[String]) -> Fact {
    let person = people.choose(rng).unwrap().clone();
    let place = places.choose(rng).unwrap().clone();
    let building = *BUILDINGS.choose(rng).unwrap();
    let year = rng.random_range(1700..2000).to_string();
    let (question, before, answer, after) = match rng.random_range(0..5) {
        0 => (
            format!("Who designed the new {building} in {place}?"),
            format!("In {year}, "),
            person,
            format!(" designed the new {building} in {place}."),
        ),
        1 => (
            format!("Where was {person} born?"),
            format!("{person} was born in "),
            place,
            " and later moved abroad.".to_string(),
        ),
        2 => (
            format!("How many {building}s does {place} have?"),
            format!("{place} has "),
            numbers.choose(rng).unwrap().clone(),
            format!(" {building}s along its main road."),
        ),
        3 => (
            format!("When did the {building} in {place} open?"),
            format!("The {building} in {place} opened in "),
            year,
            " after a long delay.".to_string(),
        ),
        _ => (
            format!("Who funded the {building}?"),
            format!("The {building} was funded by "),
            person,
            format!(" during a visit to {place}."),
        ),
    };
    Fact {
        question,
        before,
        answer,
        after,
    }
}

/// A corpus of `n` answerable questions with non-ASCII text around every
/// answer, so byte and char offsets disagree.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let table = SwapTable::starter();
    let people = table.terms_in(Category::Person);
    let places = table.terms_in(Category::Place);
    let numbers: Vec<String> = table
        .terms_in(Category::Number)
        .into_iter()
        .filter(|t| t.chars().all(|c| c.is_ascii_lowercase()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut articles = Vec::new();
    let mut made = 0;
    while made < n {
        let mut paragraphs = Vec::new();
        for _ in 0..rng.random_range(1..4) {
            if made == n {
                break;
            }
            let want = rng.random_range(1..4).min(n - made);
            let mut context = FILLERS.choose(&mut rng).unwrap().to_string();
            let mut questions = Vec::new();
            for _ in 0..want {
                let f = fact(&mut rng, &people, &places, &numbers);
                context.push(' ');
                context.push_str(&f.before);
                let byte = context.len();
                context.push_str(&f.answer);
                context.push_str(&f.after);
                questions.push(Question {
                    answers: vec![GoldAnswer {
                        answer_start: char_offset(&context, byte),
                        text: f.answer,
                    }],
                    text: f.question,
                    id: format!("syn-{made:05}"),
                });
                made += 1;
                context.push(' ');
                context.push_str(FILLERS.choose(&mut rng).unwrap());
            }
            paragraphs.push(Paragraph { context, questions });
        }
        articles.push(Article {
            title: format!("Synthetic {}", articles.len()),
            paragraphs,
        });
    }
    let corpus = Corpus {
        articles,
        version: "1.1".into(),
    };
    corpus.validate().expect("synthetic corpus is valid");
    corpus
}

/// Ten wrong answers with hand-assigned categories: six plain distractor
/// spans, two distractor spans sharing a question noun, one
/// granularity slip and one unrelated answer.
pub struct TaxonomyFixture {
    pub dataset: Corpus,
    pub store: RecordStore,
    pub predictions: advqa::metrics::PredictionSet,
}

pub fn taxonomy_fixture() -> TaxonomyFixture {
    // (question, original context, gold, distractor, prediction)
    let rows: &[(&str, &str, &str, &str, &str)] = &[
        (
            "Rudyard Kipling was an influential spokesman for what?",
            "Rudyard Kipling was an influential spokesman for imperialism.",
            "imperialism",
            "Robert Frost was an influential spokesman for oranges.",
            "oranges",
        ),
        (
            "Who painted the Mona Lisa?",
            "Leonardo da Vinci painted the Mona Lisa in Florence.",
            "Leonardo da Vinci",
            "Claude Monet painted the Starry Lake.",
            "Claude Monet",
        ),
        (
            "Which city hosted the 1936 Summer Olympics?",
            "Berlin hosted the 1936 Summer Olympics.",
            "Berlin",
            "Madrid hosted the 1932 winter games.",
            "Madrid",
        ),
        (
            "How many moons does Mars have?",
            "Mars has two small moons.",
            "two",
            "Venus has seven moons.",
            "seven",
        ),
        (
            "Who discovered penicillin in 1928?",
            "Alexander Fleming discovered penicillin in 1928.",
            "Alexander Fleming",
            "Marie Curie discovered aspirin in 1940.",
            "Marie Curie",
        ),
        (
            "Where was Mozart born?",
            "Mozart was born in Salzburg.",
            "Salzburg",
            "Beethoven was born in Stockholm.",
            "Stockholm",
        ),
        (
            "What did Alexander Graham Bell invent?",
            "Alexander Graham Bell invented the telephone.",
            "telephone",
            "Alexander Graham Bell invented the bicycle.",
            "bicycle",
        ),
        (
            "Who founded Microsoft with Paul Allen?",
            "Bill Gates founded Microsoft with Paul Allen.",
            "Bill Gates",
            "Alan Turing founded Intel with Paul Allen.",
            "Alan Turing",
        ),
        (
            "What is the tallest mountain in the world?",
            "Mount Everest is the tallest mountain in the world.",
            "Mount Everest",
            "The tallest island in the world is Greenland.",
            "Everest",
        ),
        (
            "What currency is used in Japan?",
            "The yen is used in Japan.",
            "yen",
            "Silver is used in Brazil.",
            "rice",
        ),
    ];
    let mut paragraphs = Vec::new();
    let mut store = RecordStore::default();
    let mut predictions = advqa::metrics::PredictionSet::new();
    for (i, (question, context, gold, distractor, prediction)) in rows.iter().enumerate() {
        let id = format!("tax-{i}");
        let byte = context.find(gold).unwrap();
        paragraphs.push(Paragraph {
            context: format!("{context} {distractor}"),
            questions: vec![Question {
                answers: vec![GoldAnswer {
                    answer_start: char_offset(context, byte),
                    text: gold.to_string(),
                }],
                text: question.to_string(),
                id: id.clone(),
            }],
        });
        let mut sentences = vec![distractor.to_string()];
        sentences.extend((1..5).map(|j| format!("Filler sentence number {j} for {id}.")));
        store.insert(AdversarialRecord {
            question_id: id.clone(),
            sentences,
            fake_answers: vec![prediction.to_string()],
            provenance: Provenance::RuleBased,
            qc: QcVerdict::Accepted,
        });
        predictions.insert(id, *prediction);
    }
    let dataset = Corpus {
        articles: vec![Article {
            title: "Taxonomy".into(),
            paragraphs,
        }],
        version: "1.1".into(),
    };
    dataset.validate().unwrap();
    TaxonomyFixture {
        dataset,
        store,
        predictions,
    }
}
