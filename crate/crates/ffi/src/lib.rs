//! C ABI over the advqa toolkit.
//!
//! Every fallible call returns an [`AdvqaStatus`]; on failure a message is
//! kept per thread and read back with [`advqa_last_error`]. Objects are
//! opaque handles released with their matching `_free` function. Strings
//! handed out by the library are released with [`advqa_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use advqa::adversary::{generate_store, GenerationConfig, RecordStore, SwapTable};
use advqa::augment::{build_dataset, Placement, Split};
use advqa::corpus::{load_corpus, Corpus};
use advqa::metrics::{exact_match, normalize_answer, score_predictions, token_f1, PredictionSet};
use advqa::reader::{predict_dataset, ReaderConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvqaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    InvalidArgument = 5,
    Panic = 6,
}

pub const ADVQA_PLACEMENT_APPEND: u32 = 0;
pub const ADVQA_PLACEMENT_PREPEND: u32 = 1;

pub struct AdvqaCorpus(Corpus);
pub struct AdvqaRecordStore(RecordStore);
pub struct AdvqaPredictions(PredictionSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AdvqaStatus, String);

impl Failure {
    fn new(status: AdvqaStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdvqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            AdvqaStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AdvqaStatus::Panic
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(AdvqaStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(AdvqaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn texts<'a>(ptrs: *const *const c_char, len: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptrs.is_null() {
        return Err(Failure::new(AdvqaStatus::NullArgument, format!("{what} is null")));
    }
    std::slice::from_raw_parts(ptrs, len)
        .iter()
        .map(|p| text(*p, what))
        .collect()
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure::new(AdvqaStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(AdvqaStatus::NullArgument, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: impl Into<Vec<u8>>) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(AdvqaStatus::InvalidInput, "result contains a nul byte"))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next advqa call on the same thread.
#[no_mangle]
pub extern "C" fn advqa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn advqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn advqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `answer` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_normalize_answer(answer: *const c_char, out: *mut *mut c_char) -> AdvqaStatus {
    guard(|| {
        let s = owned_string(normalize_answer(text(answer, "answer")?))?;
        put(out, s)
    })
}

/// # Safety
/// `golds` must point to `gold_count` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn advqa_exact_match(
    prediction: *const c_char,
    golds: *const *const c_char,
    gold_count: usize,
    out: *mut u8,
) -> AdvqaStatus {
    guard(|| {
        let golds = texts(golds, gold_count, "golds")?;
        put(out, exact_match(text(prediction, "prediction")?, &golds))
    })
}

/// # Safety
/// `golds` must point to `gold_count` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn advqa_token_f1(
    prediction: *const c_char,
    golds: *const *const c_char,
    gold_count: usize,
    out: *mut f64,
) -> AdvqaStatus {
    guard(|| {
        let golds = texts(golds, gold_count, "golds")?;
        put(out, token_f1(text(prediction, "prediction")?, &golds))
    })
}

/// Parse and validate a SQuAD-format JSON document.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_corpus_from_json(json: *const c_char, out: *mut *mut AdvqaCorpus) -> AdvqaStatus {
    guard(|| {
        let corpus =
            load_corpus(text(json, "json")?.as_bytes()).map_err(|e| Failure::new(AdvqaStatus::InvalidInput, e))?;
        put(out, Box::into_raw(Box::new(AdvqaCorpus(corpus))))
    })
}

/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_corpus_load(path: *const c_char, out: *mut *mut AdvqaCorpus) -> AdvqaStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        let file =
            std::fs::File::open(path).map_err(|e| Failure::new(AdvqaStatus::Io, format!("{}: {e}", path.display())))?;
        let corpus =
            load_corpus(std::io::BufReader::new(file)).map_err(|e| Failure::new(AdvqaStatus::InvalidInput, e))?;
        put(out, Box::into_raw(Box::new(AdvqaCorpus(corpus))))
    })
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_corpus_question_count(corpus: *const AdvqaCorpus, out: *mut usize) -> AdvqaStatus {
    guard(|| put(out, handle(corpus, "corpus")?.0.questions().count()))
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_corpus_to_json(corpus: *const AdvqaCorpus, out: *mut *mut c_char) -> AdvqaStatus {
    guard(|| {
        let bytes = advqa::corpus::corpus_to_bytes(&handle(corpus, "corpus")?.0);
        put(out, owned_string(bytes)?)
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn advqa_corpus_free(corpus: *mut AdvqaCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Rule-based distractor records for every question, using the built-in
/// swap table.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_generate(
    corpus: *const AdvqaCorpus,
    seed: u64,
    out: *mut *mut AdvqaRecordStore,
) -> AdvqaStatus {
    guard(|| {
        let store = generate_store(
            &handle(corpus, "corpus")?.0,
            &GenerationConfig::new(seed, SwapTable::starter()),
        );
        put(out, Box::into_raw(Box::new(AdvqaRecordStore(store))))
    })
}

/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_records_from_json(json: *const c_char, out: *mut *mut AdvqaRecordStore) -> AdvqaStatus {
    guard(|| {
        let store = RecordStore::from_json(text(json, "json")?.as_bytes())
            .map_err(|e| Failure::new(AdvqaStatus::InvalidInput, e))?;
        put(out, Box::into_raw(Box::new(AdvqaRecordStore(store))))
    })
}

/// # Safety
/// `store` must be a live handle; `total` and `accepted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_records_counts(
    store: *const AdvqaRecordStore,
    total: *mut usize,
    accepted: *mut usize,
) -> AdvqaStatus {
    guard(|| {
        let summary = handle(store, "store")?.0.summary();
        put(total, summary.total)?;
        put(accepted, summary.accepted)
    })
}

/// # Safety
/// `store` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_records_to_json(store: *const AdvqaRecordStore, out: *mut *mut c_char) -> AdvqaStatus {
    guard(|| put(out, owned_string(handle(store, "store")?.0.to_json())?))
}

/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn advqa_records_free(store: *mut AdvqaRecordStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Build one evaluation dataset with `k` distractor sentences per question.
/// `placement` is `ADVQA_PLACEMENT_APPEND` or `ADVQA_PLACEMENT_PREPEND`.
///
/// # Safety
/// `corpus` and `store` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_augment(
    corpus: *const AdvqaCorpus,
    store: *const AdvqaRecordStore,
    k: usize,
    placement: u32,
    out: *mut *mut AdvqaCorpus,
) -> AdvqaStatus {
    guard(|| {
        let placement = match placement {
            ADVQA_PLACEMENT_APPEND => Placement::Append,
            ADVQA_PLACEMENT_PREPEND => Placement::Prepend,
            other => {
                return Err(Failure::new(
                    AdvqaStatus::InvalidArgument,
                    format!("unknown placement {other}"),
                ))
            }
        };
        let dataset = build_dataset(
            &handle(corpus, "corpus")?.0,
            &handle(store, "store")?.0,
            k,
            placement,
            Split::Eval,
        )
        .map_err(|e| Failure::new(AdvqaStatus::InvalidArgument, e))?;
        put(out, Box::into_raw(Box::new(AdvqaCorpus(dataset.corpus))))
    })
}

/// Run the lexical-overlap baseline reader over every question.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_predict(corpus: *const AdvqaCorpus, out: *mut *mut AdvqaPredictions) -> AdvqaStatus {
    guard(|| {
        let predictions = predict_dataset(&handle(corpus, "corpus")?.0, &ReaderConfig::default());
        put(out, Box::into_raw(Box::new(AdvqaPredictions(predictions))))
    })
}

/// Parse a `{"question id": "answer"}` prediction file.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_predictions_from_json(
    json: *const c_char,
    out: *mut *mut AdvqaPredictions,
) -> AdvqaStatus {
    guard(|| {
        let set = PredictionSet::from_json(text(json, "json")?.as_bytes())
            .map_err(|e| Failure::new(AdvqaStatus::InvalidInput, e))?;
        put(out, Box::into_raw(Box::new(AdvqaPredictions(set))))
    })
}

/// # Safety
/// `predictions` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_predictions_to_json(
    predictions: *const AdvqaPredictions,
    out: *mut *mut c_char,
) -> AdvqaStatus {
    guard(|| put(out, owned_string(handle(predictions, "predictions")?.0.to_json())?))
}

/// # Safety
/// `predictions` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn advqa_predictions_free(predictions: *mut AdvqaPredictions) {
    if !predictions.is_null() {
        drop(Box::from_raw(predictions));
    }
}

/// Mean exact match and F1, both as percentages. Questions without a
/// prediction score zero.
///
/// # Safety
/// Both handles must be live; `em` and `f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn advqa_evaluate(
    predictions: *const AdvqaPredictions,
    dataset: *const AdvqaCorpus,
    em: *mut f64,
    f1: *mut f64,
) -> AdvqaStatus {
    guard(|| {
        let report = score_predictions(
            &handle(predictions, "predictions")?.0,
            &handle(dataset, "dataset")?.0,
            "",
            "",
        );
        put(em, report.mean_em)?;
        put(f1, report.mean_f1)
    })
}
