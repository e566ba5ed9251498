//! Acceptance suite. Each criterion runs once, prints a single PASS/FAIL
//! line with its wall time, and the process exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use advqa::adversary::{contains_gold, generate_store, GenerationConfig, RecordStore, SwapTable, SENTENCES_PER_RECORD};
use advqa::augment::{build_dataset, standard_eval_settings, AugmentedDataset, Placement, Split};
use advqa::corpus::{char_slice, Corpus};
use advqa::eval::{
    error_breakdown, export_report, run_matrix, CellInput, ErrorCategory, ExportFormat, MatrixMetadata, MatrixReport,
};
use advqa::metrics::{exact_match, normalize_answer, score_predictions, token_f1, PredictionSet};
use advqa::reader::{predict_dataset, ReaderConfig};
use advqa::text::Stopwords;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use serde::Deserialize;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Deserialize)]
struct MetricCase {
    prediction: String,
    golds: Vec<String>,
    em: u8,
    f1: [u32; 2],
}

fn metric_conformance() -> Outcome {
    let text = std::fs::read_to_string(common::fixture_path("metric_conformance.json")).unwrap();
    let cases: Vec<MetricCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(cases.len() == 20, || {
        format!("fixture has {} cases, want 20", cases.len())
    })?;
    for (i, c) in cases.iter().enumerate() {
        let em = exact_match(&c.prediction, &c.golds);
        let f1 = token_f1(&c.prediction, &c.golds);
        let want = c.f1[0] as f64 / c.f1[1] as f64;
        ensure(em == c.em && f1 == want, || {
            format!(
                "case {i} {:?}: em {em} f1 {f1}, want em {} f1 {want}",
                c.prediction, c.em
            )
        })?;
    }
    let golds = ["Royal Shakespeare"];
    let em = exact_match("Royal Shakespeare Company", &golds);
    let f1 = token_f1("Royal Shakespeare Company", &golds);
    ensure(em == 0 && (f1 - 0.8).abs() <= 1e-9, || format!("em {em} f1 {f1}"))?;
    Ok(format!("{} cases exact; royal shakespeare em=0 f1={f1}", cases.len()))
}

fn all_datasets(corpus: &Corpus, store: &RecordStore) -> Result<Vec<AugmentedDataset>, String> {
    standard_eval_settings()
        .into_iter()
        .map(|(k, p)| build_dataset(corpus, store, k, p, Split::Eval).map_err(|e| e.to_string()))
        .collect()
}

fn span_safety() -> Outcome {
    let corpus = common::synthetic_corpus(1000, 7);
    let store = generate_store(&corpus, &GenerationConfig::new(42, SwapTable::starter()));
    let datasets = all_datasets(&corpus, &store)?;
    ensure(datasets.len() == 11, || format!("{} datasets", datasets.len()))?;
    let mut checked = 0;
    let mut min_questions = usize::MAX;
    for d in &datasets {
        min_questions = min_questions.min(d.question_count());
        for (p, q) in d.corpus.questions() {
            for a in &q.answers {
                let got = char_slice(&p.context, a.answer_start, a.text.chars().count());
                ensure(got == Some(a.text.as_str()), || {
                    format!("{} {}: slice {:?} != gold {:?}", d.name, q.id, got, a.text)
                })?;
                checked += 1;
            }
        }
    }
    ensure(min_questions > 0, || "a dataset came out empty".into())?;
    let summary = store.summary();
    Ok(format!(
        "{checked} answers over 11 datasets all match; {}/{} records accepted",
        summary.accepted, summary.total
    ))
}

fn check_store(store: &RecordStore, corpus: &Corpus) -> Result<usize, String> {
    let mut accepted = 0;
    for (_, q) in corpus.questions() {
        let Some(r) = store.get(&q.id) else {
            return Err(format!("{} has no record", q.id));
        };
        if !r.is_accepted() {
            continue;
        }
        accepted += 1;
        let golds = q.gold_texts();
        ensure(r.sentences.len() == SENTENCES_PER_RECORD, || {
            format!("{} has {} sentences", q.id, r.sentences.len())
        })?;
        for s in &r.sentences {
            let leaked = golds.iter().any(|g| normalize_answer(s).contains(&normalize_answer(g)));
            ensure(!leaked && !contains_gold(s, &golds), || {
                format!("{} leaks gold in {s:?}", q.id)
            })?;
        }
    }
    Ok(accepted)
}

fn qc_guarantee() -> Outcome {
    let attack = common::attack_corpus();
    let table = common::attack_table();
    let accepted = check_store(
        &generate_store(&attack, &GenerationConfig::new(42, table.clone())),
        &attack,
    )?;
    let synthetic = common::synthetic_corpus(120, 11);

    let mut runner = TestRunner::new(PropConfig {
        cases: 16,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&proptest::num::u64::ANY, |seed| {
        let a = generate_store(&attack, &GenerationConfig::new(seed, table.clone()));
        check_store(&a, &attack).map_err(proptest::test_runner::TestCaseError::fail)?;
        let s = generate_store(&synthetic, &GenerationConfig::new(seed, SwapTable::starter()));
        check_store(&s, &synthetic).map_err(proptest::test_runner::TestCaseError::fail)?;
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!(
        "seed 42: {accepted}/{} accepted and clean; 16 random seeds clean",
        attack.questions().count()
    ))
}

struct PipelineRun {
    dataset_bytes: Vec<(String, Vec<u8>)>,
    report: MatrixReport,
}

fn pipeline(corpus: &Corpus, table: &SwapTable, seed: u64) -> Result<PipelineRun, String> {
    let store = generate_store(corpus, &GenerationConfig::new(seed, table.clone()));
    let datasets = all_datasets(corpus, &store)?;
    let reader = ReaderConfig::default();
    let predictions: Vec<PredictionSet> = datasets.iter().map(|d| predict_dataset(&d.corpus, &reader)).collect();
    let hashes: BTreeMap<String, String> = datasets.iter().map(|d| (d.name.clone(), d.content_hash())).collect();
    let inputs: Vec<CellInput<'_>> = datasets
        .iter()
        .zip(&predictions)
        .map(|(d, p)| CellInput {
            row: "baseline",
            column: &d.name,
            predictions: p,
            dataset: &d.corpus,
        })
        .collect();
    let report = run_matrix(&inputs, MatrixMetadata::at(0, hashes));
    Ok(PipelineRun {
        dataset_bytes: datasets.iter().map(|d| (d.name.clone(), d.to_bytes())).collect(),
        report,
    })
}

fn determinism() -> Outcome {
    let corpus = common::attack_corpus();
    let table = common::attack_table();
    let a = pipeline(&corpus, &table, 42)?;
    let b = pipeline(&corpus, &table, 42)?;
    ensure(a.dataset_bytes == b.dataset_bytes, || "dataset bytes differ".into())?;
    ensure(a.report == b.report, || "matrix reports differ".into())?;
    let json_a = export_report(&a.report, ExportFormat::Json);
    ensure(json_a == export_report(&b.report, ExportFormat::Json), || {
        "report JSON differs".into()
    })?;
    let synthetic = common::synthetic_corpus(1000, 7);
    let c = pipeline(&synthetic, &SwapTable::starter(), 42)?;
    let d = pipeline(&synthetic, &SwapTable::starter(), 42)?;
    ensure(c.dataset_bytes == d.dataset_bytes && c.report == d.report, || {
        "synthetic pipeline not reproducible".into()
    })?;
    let other = pipeline(&corpus, &table, 43)?;
    ensure(other.dataset_bytes != a.dataset_bytes, || "seed is ignored".into())?;
    let bytes: usize = a.dataset_bytes.iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "fixture and 1000-question runs identical twice over ({bytes} fixture bytes); seed 43 differs"
    ))
}

fn attack_f1_curve() -> Result<(Vec<f64>, AugmentedDataset, PredictionSet, RecordStore), String> {
    let corpus = common::attack_corpus();
    let store = generate_store(&corpus, &GenerationConfig::new(42, common::attack_table()));
    let reader = ReaderConfig::default();
    let mut curve = Vec::new();
    let mut append_one = None;
    for k in 0..=5 {
        let d = build_dataset(&corpus, &store, k, Placement::Append, Split::Eval).map_err(|e| e.to_string())?;
        let preds = predict_dataset(&d.corpus, &reader);
        curve.push(score_predictions(&preds, &d.corpus, &d.name, "baseline").mean_f1);
        if k == 1 {
            append_one = Some((d, preds));
        }
    }
    let (d, p) = append_one.unwrap();
    Ok((curve, d, p, store))
}

fn attack_reproduction() -> Outcome {
    let corpus = common::attack_corpus();
    ensure(corpus.questions().count() == 50, || {
        "fixture must hold 50 questions".into()
    })?;
    let texts: Vec<&str> = corpus.questions().map(|(_, q)| q.text.as_str()).collect();
    ensure(
        texts.contains(&"What is the name of the quarterback who was 38 in Super Bowl XXXIII?")
            && texts.contains(&"Rudyard Kipling was an influential spokesman for what?"),
        || "fixture lacks the Super Bowl or Kipling item".into(),
    )?;
    let (curve, d, _, _) = attack_f1_curve()?;
    ensure(d.question_count() == 50, || {
        format!("append-1 kept {} questions", d.question_count())
    })?;
    let drop = curve[0] - curve[1];
    ensure(drop >= 30.0, || format!("drop {drop:.1} < 30 (curve {curve:.1?})"))?;
    ensure(curve.windows(2).all(|w| w[1] <= w[0]), || {
        format!("not monotone: {curve:.1?}")
    })?;
    Ok(format!("F1 append-0..5 = {curve:.1?}, drop {drop:.1}"))
}

fn error_taxonomy() -> Outcome {
    let stopwords = Stopwords::default();
    let fx = common::taxonomy_fixture();
    let report = score_predictions(&fx.predictions, &fx.dataset, "taxonomy", "fixture");
    let b = error_breakdown(&report, &fx.dataset, &fx.store, &stopwords, 5);
    let want = [
        (ErrorCategory::AdversarialSpan, 6),
        (ErrorCategory::AdversarialSpanNounOverlap, 2),
        (ErrorCategory::Granularity, 1),
        (ErrorCategory::Other, 1),
    ];
    ensure(b.total_errors == 10, || format!("{} errors", b.total_errors))?;
    for (c, n) in want {
        ensure(b.count(c) == n, || format!("{c}: {} want {n}", b.count(c)))?;
    }

    let (_, d, preds, store) = attack_f1_curve()?;
    let report = score_predictions(&preds, &d.corpus, &d.name, "baseline");
    let real = error_breakdown(&report, &d.corpus, &store, &stopwords, 3);
    let adversarial =
        real.count(ErrorCategory::AdversarialSpan) + real.count(ErrorCategory::AdversarialSpanNounOverlap);
    let share = 100.0 * adversarial as f64 / real.total_errors.max(1) as f64;
    ensure(real.total_errors > 0 && share > 50.0, || {
        format!("adversarial share {share:.1}% of {} errors", real.total_errors)
    })?;
    Ok(format!(
        "fixture 6/2/1/1 exact; append-1 adversarial share {share:.1}% of {} errors",
        real.total_errors
    ))
}

fn grid_integrity() -> Outcome {
    let corpus = common::synthetic_corpus(400, 3);
    let store = generate_store(&corpus, &GenerationConfig::new(42, SwapTable::starter()));
    let datasets = all_datasets(&corpus, &store)?;
    let gold: Vec<PredictionSet> = datasets.iter().map(|d| PredictionSet::from_gold(&d.corpus)).collect();
    let inputs: Vec<CellInput<'_>> = datasets
        .iter()
        .zip(&gold)
        .map(|(d, p)| CellInput {
            row: "gold",
            column: &d.name,
            predictions: p,
            dataset: &d.corpus,
        })
        .collect();
    let hashes = datasets.iter().map(|d| (d.name.clone(), d.content_hash())).collect();
    let report = run_matrix(&inputs, MatrixMetadata::at(1_700_000_000, hashes));
    for c in &report.cells {
        ensure(c.mean_em == 100.0 && c.mean_f1 == 100.0, || {
            format!("{}: em {} f1 {}", c.column, c.mean_em, c.mean_f1)
        })?;
    }
    ensure(report.inconsistent_cells().is_empty(), || {
        "stored means disagree".into()
    })?;

    let (_, d, preds, store) = attack_f1_curve()?;
    let noisy = run_matrix(
        &[CellInput {
            row: "baseline",
            column: &d.name,
            predictions: &preds,
            dataset: &d.corpus,
        }],
        MatrixMetadata::at(5, BTreeMap::new()),
    );
    for r in [&report, &noisy] {
        let back = MatrixReport::from_json(&export_report(r, ExportFormat::Json)).map_err(|e| e.to_string())?;
        ensure(&back == r, || "matrix report changed through JSON".into())?;
    }
    let cell = &noisy.cells[0].report;
    let back: advqa::metrics::EvalReport = serde_json::from_slice(&cell.to_json()).map_err(|e| e.to_string())?;
    ensure(&back == cell, || "eval report changed through JSON".into())?;
    let breakdown = error_breakdown(cell, &d.corpus, &store, &Stopwords::default(), 2);
    let back: advqa::eval::ErrorBreakdown = serde_json::from_slice(&breakdown.to_json()).map_err(|e| e.to_string())?;
    ensure(back == breakdown, || "error breakdown changed through JSON".into())?;
    Ok(format!(
        "{} gold cells at 100/100; matrix, eval and breakdown JSON lossless",
        report.cells.len()
    ))
}

fn main() {
    let criteria = [
        Criterion {
            name: "metric-conformance",
            budget: Duration::from_secs(1),
            run: metric_conformance,
        },
        Criterion {
            name: "span-safety",
            budget: Duration::from_secs(10),
            run: span_safety,
        },
        Criterion {
            name: "qc-guarantee",
            budget: Duration::from_secs(5),
            run: qc_guarantee,
        },
        Criterion {
            name: "determinism",
            budget: Duration::from_secs(60),
            run: determinism,
        },
        Criterion {
            name: "attack-reproduction",
            budget: Duration::from_secs(10),
            run: attack_reproduction,
        },
        Criterion {
            name: "error-taxonomy",
            budget: Duration::from_secs(5),
            run: error_taxonomy,
        },
        Criterion {
            name: "grid-integrity",
            budget: Duration::from_secs(60),
            run: grid_integrity,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {:?}", c.budget)),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:<20} {:>8.3}s  {}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            took.as_secs_f64(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
