//! Few-shot distractor generation through a chat-completions endpoint.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{
    contains_gold, qc_filter, AdversarialRecord, Provenance, QcVerdict, RecordStore, SENTENCES_PER_RECORD,
};
use crate::corpus::{Corpus, Question};

pub const DEFAULT_DEMONSTRATIONS: &str = include_str!("../data/demonstrations.json");
pub const API_KEY_ENV: &str = "ADVQA_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("at least one demonstration is required")]
    NoDemonstrations,
    #[error("invalid demonstration for `{question}`: {message}")]
    InvalidDemonstration { question: String, message: String },
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("rate limited by the endpoint after {attempts} attempts")]
    RateLimited { attempts: usize },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no API key: set {API_KEY_ENV}")]
    MissingApiKey,
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub question: String,
    pub gold_answer: String,
    pub sentences: Vec<String>,
}

impl Demonstration {
    pub fn validate(&self) -> Result<(), LlmError> {
        let invalid = |message: String| LlmError::InvalidDemonstration {
            question: self.question.clone(),
            message,
        };
        if self.sentences.len() != SENTENCES_PER_RECORD {
            return Err(invalid(format!("expected 5 sentences, found {}", self.sentences.len())));
        }
        if let Some(s) = self.sentences.iter().find(|s| contains_gold(s, &[&self.gold_answer])) {
            return Err(invalid(format!("sentence contains the answer: {s}")));
        }
        Ok(())
    }
}

pub fn parse_demonstrations(text: &str) -> Result<Vec<Demonstration>, LlmError> {
    let demos: Vec<Demonstration> = serde_json::from_str(text).map_err(|e| LlmError::InvalidDemonstration {
        question: String::new(),
        message: e.to_string(),
    })?;
    for d in &demos {
        d.validate()?;
    }
    Ok(demos)
}

pub fn default_demonstrations() -> Vec<Demonstration> {
    parse_demonstrations(DEFAULT_DEMONSTRATIONS).expect("bundled demonstrations are valid")
}

#[derive(Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Read from the environment; never serialized.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_retries: usize,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// 0 disables the limit.
    pub requests_per_minute: u32,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-3.5-turbo".into(),
            api_key: None,
            temperature: 0.7,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            requests_per_minute: 60,
        }
    }
}

impl fmt::Debug for EndpointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndpointConfig")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("temperature", &self.temperature)
            .field("max_retries", &self.max_retries)
            .field("timeout", &self.timeout)
            .field("requests_per_minute", &self.requests_per_minute)
            .finish()
    }
}

impl EndpointConfig {
    pub fn with_key_from_env(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

const INSTRUCTIONS: &str = "You write distractor sentences for reading-comprehension questions. \
For the final question, produce exactly five adversarial sentences, numbered 1-5. \
Each sentence must look like it answers a question similar to the given one, \
must change the entities of the question, and must not contain the answer.";

pub fn build_prompt(demonstrations: &[Demonstration], question: &str, gold: &str) -> Result<String, LlmError> {
    if demonstrations.is_empty() {
        return Err(LlmError::NoDemonstrations);
    }
    let mut prompt = String::from(INSTRUCTIONS);
    prompt.push_str("\n\n");
    for d in demonstrations {
        prompt.push_str(&format!(
            "Question: {}\nAnswer: {}\nSentences:\n",
            d.question, d.gold_answer
        ));
        for (i, s) in d.sentences.iter().enumerate() {
            prompt.push_str(&format!("{}. {}\n", i + 1, s));
        }
        prompt.push('\n');
    }
    prompt.push_str(&format!("Question: {question}\nAnswer: {gold}\nSentences:\n1."));
    Ok(prompt)
}

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:\d+\s*[.)]|[-*•])\s*(.*?)\s*$").unwrap());

/// Pull the numbered or bulleted lines out of a completion and run them
/// through the quality filter.
pub fn parse_response<G: AsRef<str>>(raw: &str, golds: &[G]) -> (Vec<String>, QcVerdict) {
    let sentences: Vec<String> = raw
        .lines()
        .filter_map(|line| MARKER.captures(line))
        .map(|c| c[1].to_string())
        .filter(|s| !s.is_empty())
        .map(|s| {
            if s.ends_with(['.', '!', '?']) {
                s
            } else {
                format!("{s}.")
            }
        })
        .collect();
    let verdict = qc_filter(&sentences, golds);
    (sentences, verdict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub base_url: &'a str,
    pub model: &'a str,
    pub api_key: Option<&'a str>,
    pub prompt: &'a str,
    pub temperature: f64,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Network(String),
    RateLimited,
    Server(u16),
    Auth(String),
    Malformed(String),
}

/// Sends one completion request and returns the completion text.
pub trait Transport: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError>;
}

/// Chat-completions over HTTPS with bearer auth.
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError> {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let url = format!("{}/chat/completions", request.base_url.trim_end_matches('/'));
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut call = agent.post(&url);
        if let Some(key) = request.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(body)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(TransportError::Auth(text)),
            429 => return Err(TransportError::RateLimited),
            s if s >= 500 => return Err(TransportError::Server(s)),
            s => return Err(TransportError::Malformed(format!("status {s}: {text}"))),
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError::Malformed("no choices[0].message.content".into()))
    }
}

/// Time source and sleeper, replaceable in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Spaces requests at least `60 / rpm` seconds apart.
pub struct RateLimiter {
    interval: Option<Duration>,
    next_slot: Mutex<Duration>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: u32) -> Self {
        RateLimiter {
            interval: (requests_per_minute > 0).then(|| Duration::from_secs(60) / requests_per_minute),
            next_slot: Mutex::new(Duration::ZERO),
        }
    }

    pub fn acquire(&self, clock: &dyn Clock) {
        let Some(interval) = self.interval else {
            return;
        };
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let now = clock.now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            clock.sleep(wait);
        }
    }
}

pub const BACKOFF_BASE: Duration = Duration::from_millis(500);
const BACKOFF_CAP: Duration = Duration::from_secs(30);

fn backoff(retry: usize) -> Duration {
    let factor = 1u32 << retry.min(16);
    (BACKOFF_BASE * factor).min(BACKOFF_CAP)
}

/// Send the prompt, retrying transient failures with exponential backoff.
pub fn request_generation(
    prompt: &str,
    endpoint: &EndpointConfig,
    transport: &dyn Transport,
    clock: &dyn Clock,
    limiter: &RateLimiter,
) -> Result<String, LlmError> {
    let request = CompletionRequest {
        base_url: &endpoint.base_url,
        model: &endpoint.model_name,
        api_key: endpoint.api_key.as_deref(),
        prompt,
        temperature: endpoint.temperature,
        timeout: endpoint.timeout,
    };
    let attempts = endpoint.max_retries + 1;
    let mut last = TransportError::Network("no attempt made".into());
    for attempt in 0..attempts {
        if attempt > 0 {
            clock.sleep(backoff(attempt - 1));
        }
        limiter.acquire(clock);
        match transport.complete(&request) {
            Ok(text) => return Ok(text),
            Err(TransportError::Auth(m)) => return Err(LlmError::AuthError(m)),
            Err(TransportError::Malformed(m)) => return Err(LlmError::MalformedResponse(m)),
            Err(e) => last = e,
        }
    }
    Err(match last {
        TransportError::RateLimited => LlmError::RateLimited { attempts },
        TransportError::Server(s) => LlmError::NetworkError(format!("server returned {s}")),
        TransportError::Network(m) => LlmError::NetworkError(m),
        TransportError::Auth(m) => LlmError::AuthError(m),
        TransportError::Malformed(m) => LlmError::MalformedResponse(m),
    })
}

/// Completions on disk, one file per content hash.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn key(prompt: &str, model: &str, temperature: f64) -> String {
        let mut h = Sha256::new();
        for part in [
            prompt.as_bytes(),
            model.as_bytes(),
            &temperature.to_bits().to_le_bytes(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path(key)).ok()
    }

    /// Write to a temporary file and rename into place, so concurrent
    /// writers never expose a partial entry.
    pub fn put(&self, key: &str, text: &str) -> Result<(), LlmError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Everything needed to generate records remotely.
pub struct LlmBackend {
    pub endpoint: EndpointConfig,
    pub demonstrations: Vec<Demonstration>,
    pub transport: Box<dyn Transport>,
    pub clock: Box<dyn Clock>,
    pub cache: Option<ResponseCache>,
    limiter: RateLimiter,
    requests: AtomicUsize,
}

impl LlmBackend {
    pub fn new(
        endpoint: EndpointConfig,
        demonstrations: Vec<Demonstration>,
        transport: Box<dyn Transport>,
        clock: Box<dyn Clock>,
        cache: Option<ResponseCache>,
    ) -> Self {
        let limiter = RateLimiter::new(endpoint.requests_per_minute);
        LlmBackend {
            endpoint,
            demonstrations,
            transport,
            clock,
            cache,
            limiter,
            requests: AtomicUsize::new(0),
        }
    }

    /// Requests actually sent (cache hits excluded).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let key = ResponseCache::key(prompt, &self.endpoint.model_name, self.endpoint.temperature);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let text = request_generation(prompt, &self.endpoint, &*self.transport, &*self.clock, &self.limiter)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &text)?;
        }
        Ok(text)
    }

    pub fn generate_record(&self, question: &Question) -> Result<AdversarialRecord, LlmError> {
        let golds = question.gold_texts();
        let gold = golds.first().copied().unwrap_or_default();
        let prompt = build_prompt(&self.demonstrations, &question.text, gold)?;
        let raw = self.complete(&prompt)?;
        let (sentences, qc) = parse_response(&raw, &golds);
        Ok(AdversarialRecord {
            question_id: question.id.clone(),
            sentences,
            fake_answers: Vec::new(),
            provenance: Provenance::Generated,
            qc,
        })
    }

    /// One record per question. Stops at the first request failure; cached
    /// completions make a rerun resume where it left off.
    pub fn generate_store(&self, corpus: &Corpus) -> Result<RecordStore, LlmError> {
        let questions: Vec<&Question> = corpus.questions().map(|(_, q)| q).collect();
        let records: Vec<AdversarialRecord> = questions
            .par_iter()
            .map(|q| self.generate_record(q))
            .collect::<Result<_, _>>()?;
        Ok(records.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::RejectReason;
    use std::sync::Arc;

    #[derive(Default)]
    struct FakeClock {
        now: Mutex<Duration>,
        sleeps: Mutex<Vec<Duration>>,
    }

    impl Clock for Arc<FakeClock> {
        fn now(&self) -> Duration {
            *self.now.lock().unwrap()
        }

        fn sleep(&self, d: Duration) {
            *self.now.lock().unwrap() += d;
            self.sleeps.lock().unwrap().push(d);
        }
    }

    struct Scripted {
        replies: Mutex<Vec<Result<String, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<String, TransportError>>) -> Self {
            replies.reverse();
            Scripted {
                replies: Mutex::new(replies),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for Scripted {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut r = self.replies.lock().unwrap();
            if r.len() > 1 {
                r.pop().unwrap()
            } else {
                r[0].clone()
            }
        }
    }

    fn endpoint(max_retries: usize) -> EndpointConfig {
        EndpointConfig {
            max_retries,
            requests_per_minute: 0,
            ..Default::default()
        }
    }

    fn run(transport: &Scripted, max_retries: usize) -> (Result<String, LlmError>, Vec<Duration>) {
        let clock = Arc::new(FakeClock::default());
        let limiter = RateLimiter::new(0);
        let out = request_generation("p", &endpoint(max_retries), transport, &clock, &limiter);
        let sleeps = clock.sleeps.lock().unwrap().clone();
        (out, sleeps)
    }

    #[test]
    fn pass_through() {
        let t = Scripted::new(vec![Ok("1. A.\n".into())]);
        assert_eq!(run(&t, 0).0.unwrap(), "1. A.\n");
    }

    #[test]
    fn retries_then_succeeds() {
        let net = || Err(TransportError::Network("reset".into()));
        let t = Scripted::new(vec![net(), net(), Ok("done".into())]);
        let (out, sleeps) = run(&t, 3);
        assert_eq!(out.unwrap(), "done");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        assert_eq!(sleeps, [BACKOFF_BASE, BACKOFF_BASE * 2]);
    }

    #[test]
    fn gives_up_after_retries() {
        let t = Scripted::new(vec![Err(TransportError::Network("down".into()))]);
        let (out, _) = run(&t, 2);
        assert!(matches!(out, Err(LlmError::NetworkError(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);

        let t = Scripted::new(vec![Err(TransportError::RateLimited)]);
        assert!(matches!(run(&t, 1).0, Err(LlmError::RateLimited { attempts: 2 })));

        let t = Scripted::new(vec![Err(TransportError::Auth("bad key".into()))]);
        assert!(matches!(run(&t, 5).0, Err(LlmError::AuthError(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn rate_limit_spaces_requests() {
        let clock = Arc::new(FakeClock::default());
        let limiter = RateLimiter::new(30);
        for _ in 0..3 {
            limiter.acquire(&clock);
        }
        assert_eq!(
            *clock.sleeps.lock().unwrap(),
            [Duration::from_secs(2), Duration::from_secs(2)]
        );
    }

    #[test]
    fn prompt_structure() {
        let demos = default_demonstrations();
        assert_eq!(demos.len(), 4);
        assert!(matches!(build_prompt(&[], "q", "a"), Err(LlmError::NoDemonstrations)));
        let p = build_prompt(&demos[..1], "What are the Siouan-speaking tribes?", "Catawba").unwrap();
        for s in &demos[0].sentences {
            assert!(p.contains(s.as_str()));
        }
        assert!(p.contains("5. The Seine flows through the city of Rouen."));
        assert!(p.ends_with("Question: What are the Siouan-speaking tribes?\nAnswer: Catawba\nSentences:\n1."));
        assert_eq!(
            p,
            build_prompt(&demos[..1], "What are the Siouan-speaking tribes?", "Catawba").unwrap()
        );
    }

    #[test]
    fn parsing() {
        let (s, v) = parse_response("1. A\n2. B\n3. C\n4. D\n5. E", &["zebra"]);
        assert_eq!(v, QcVerdict::Accepted);
        assert_eq!(s, ["A.", "B.", "C.", "D.", "E."]);

        let (_, v) = parse_response("Sure!\n1) A.\n- B.\n* C.\n4. D.\n5. E.", &["zebra"]);
        assert_eq!(v, QcVerdict::Accepted);

        let (_, v) = parse_response("1. A\n2. B\n3. C\n4. D\n5. E\n6. F", &["zebra"]);
        assert_eq!(v, QcVerdict::Rejected(RejectReason::WrongCount));

        let (_, v) = parse_response("1. A\n2. B\n3. A zebra.\n4. D\n5. E", &["zebra"]);
        assert_eq!(v, QcVerdict::Rejected(RejectReason::ContainsGoldAnswer));

        let (s, v) = parse_response("no list at all", &["zebra"]);
        assert!(s.is_empty());
        assert_eq!(v, QcVerdict::Rejected(RejectReason::WrongCount));
    }

    #[test]
    fn cache_round_trip_and_counter() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("cache")).unwrap();
        let reply = "1. The Iroquoian-speaking tribes are Cherokee.\n2. B.\n3. C.\n4. D.\n5. E.";
        let backend = LlmBackend::new(
            endpoint(0),
            default_demonstrations(),
            Box::new(Scripted::new(vec![Ok(reply.into())])),
            Box::new(Arc::new(FakeClock::default())),
            Some(cache.clone()),
        );
        let q = Question {
            answers: vec![crate::corpus::GoldAnswer {
                answer_start: 0,
                text: "Catawba".into(),
            }],
            text: "What are the Siouan-speaking tribes?".into(),
            id: "s".into(),
        };
        let a = backend.generate_record(&q).unwrap();
        let b = backend.generate_record(&q).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Provenance::Generated);
        assert!(a.is_accepted());
        assert_eq!(backend.request_count(), 1);
        assert_eq!(fs::read_dir(cache.dir()).unwrap().count(), 1);
        assert_ne!(ResponseCache::key("p", "m", 0.7), ResponseCache::key("p", "m", 0.8));
    }

    #[test]
    fn key_is_redacted() {
        let e = EndpointConfig {
            api_key: Some("sk-secret".into()),
            ..Default::default()
        };
        assert!(!format!("{e:?}").contains("sk-secret"));
        assert!(!serde_json::to_string(&e).unwrap().contains("sk-secret"));
    }
}
