//! The `advqa` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{generate_store, GenerationConfig, RecordStore, SwapTable};
use crate::augment::{build_dataset, dataset_manifest, standard_eval_settings, Placement, Split, MAX_K};
use crate::config::{Backend, RunConfig};
use crate::corpus::{corpus_stats, load_corpus_with, Corpus, LoadOptions};
use crate::eval::{error_breakdown, export_report, run_matrix, CellInput, ExportFormat, MatrixMetadata};
use crate::llm::{self, HttpTransport, LlmBackend, ResponseCache, SystemClock};
use crate::metrics::{score_predictions, PredictionSet};
use crate::reader::{predict_dataset, ReaderConfig};
use crate::text::Stopwords;

#[derive(Debug, Parser)]
#[command(
    name = "advqa",
    version,
    about = "Adversarial distractor generation and robustness evaluation for SQuAD-format corpora"
)]
struct Cli {
    /// Random seed for generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Drop invalid questions instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReaderKind {
    Baseline,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a corpus and print its statistics.
    Validate { corpus: PathBuf },
    /// Build the distractor record store for a corpus.
    Generate {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        #[arg(long)]
        swap_table: Option<PathBuf>,
        #[arg(long)]
        max_template_attempts: Option<usize>,
        #[arg(long)]
        demonstrations: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Build append-k / prepend-k datasets and their manifest.
    Augment {
        corpus: PathBuf,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// Comma-separated placements (append, prepend).
        #[arg(long, value_delimiter = ',')]
        placement: Option<Vec<Placement>>,
        #[arg(long)]
        split: Option<Split>,
        /// Permit prepend placement for training builds.
        #[arg(long)]
        allow_prepend_train: bool,
    },
    /// Answer every question of a dataset.
    Predict {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "baseline")]
        reader: ReaderKind,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        max_answer_tokens: Option<usize>,
    },
    /// Score one prediction file against a dataset.
    Evaluate {
        dataset: PathBuf,
        predictions: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every (predictions, dataset) pair listed in a run spec.
    Matrix {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sort wrong answers into error categories.
    Categorize {
        dataset: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 5)]
        exemplars: usize,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A problem with how the command was invoked rather than with its inputs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Parse `args` (program name first), run, and return the exit code:
/// 0 success, 1 operational error, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run `advqa --help` for usage");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file_config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = flag_config(&cli);
    let config = file_config.overlay(&flags);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("starting worker pool")?;
    let ctx = Ctx {
        config,
        force: cli.force,
        lenient: cli.lenient,
    };
    pool.install(|| dispatch(&ctx, cli.command))
}

fn flag_config(cli: &Cli) -> RunConfig {
    let mut c = RunConfig {
        seed: cli.seed,
        jobs: cli.jobs,
        ..Default::default()
    };
    match &cli.command {
        Command::Validate { corpus } => c.paths.corpus = Some(corpus.clone()),
        Command::Generate {
            corpus,
            out,
            backend,
            swap_table,
            max_template_attempts,
            demonstrations,
            cache_dir,
        } => {
            c.paths.corpus = Some(corpus.clone());
            c.paths.output = Some(out.clone());
            c.generate.backend = *backend;
            c.generate.swap_table = swap_table.clone();
            c.generate.max_template_attempts = *max_template_attempts;
            c.generate.demonstrations = demonstrations.clone();
            c.generate.cache_dir = cache_dir.clone();
        }
        Command::Augment {
            corpus,
            records,
            out,
            k,
            placement,
            split,
            ..
        } => {
            c.paths.corpus = Some(corpus.clone());
            c.paths.records = records.clone();
            c.paths.output = Some(out.clone());
            c.augment.k = k.clone();
            c.augment.placements = placement.clone();
            c.augment.split = *split;
        }
        Command::Predict {
            dataset,
            out,
            stopwords,
            max_answer_tokens,
            ..
        } => {
            c.paths.corpus = Some(dataset.clone());
            c.paths.output = Some(out.clone());
            c.reader.stopwords = stopwords.clone();
            c.reader.max_answer_tokens = *max_answer_tokens;
        }
        Command::Evaluate { dataset, out, .. } => {
            c.paths.corpus = Some(dataset.clone());
            c.paths.output = out.clone();
        }
        Command::Matrix { out, .. } => c.paths.output = Some(out.clone()),
        Command::Categorize {
            dataset,
            records,
            stopwords,
            out,
            ..
        } => {
            c.paths.corpus = Some(dataset.clone());
            c.paths.records = Some(records.clone());
            c.paths.output = out.clone();
            c.reader.stopwords = stopwords.clone();
        }
    }
    c
}

struct Ctx {
    config: RunConfig,
    force: bool,
    lenient: bool,
}

impl Ctx {
    fn load_corpus(&self, path: &Path) -> Result<Corpus> {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let outcome = load_corpus_with(std::io::BufReader::new(file), LoadOptions { lenient: self.lenient })
            .with_context(|| format!("loading {}", path.display()))?;
        if !outcome.dropped.is_empty() {
            eprintln!(
                "warning: dropped {} invalid question(s) from {}",
                outcome.dropped.len(),
                path.display()
            );
        }
        Ok(outcome.corpus)
    }

    fn fresh_dir(&self, dir: &Path) -> Result<()> {
        if dir.exists() && !self.force {
            bail!("{} already exists (use --force to overwrite)", dir.display());
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
    }

    fn fresh_file(&self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            bail!("{} already exists (use --force to overwrite)", path.display());
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(())
    }

    fn stopwords(&self) -> Result<Stopwords> {
        match &self.config.reader.stopwords {
            Some(path) => Ok(Stopwords::parse(&read_text(path)?)),
            None => Ok(Stopwords::default()),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record the resolved config and the hash of every input next to the
/// outputs.
fn write_provenance(dir: &Path, config: &RunConfig, inputs: &[&Path]) -> Result<()> {
    write(&dir.join("run_config.toml"), config.to_toml())?;
    let mut hashes = BTreeMap::new();
    for input in inputs {
        hashes.insert(input.display().to_string(), sha256_hex(&read_bytes(input)?));
    }
    write(
        &dir.join("inputs.json"),
        serde_json::to_vec_pretty(&hashes).expect("hashes serialize"),
    )
}

fn load_store(path: &Path) -> Result<RecordStore> {
    RecordStore::from_json(&read_bytes(path)?).with_context(|| format!("parsing records {}", path.display()))
}

fn load_predictions(path: &Path) -> Result<PredictionSet> {
    PredictionSet::from_json(&read_bytes(path)?).with_context(|| format!("parsing predictions {}", path.display()))
}

fn stem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Validate { corpus } => validate(ctx, &corpus),
        Command::Generate { corpus, out, .. } => generate(ctx, &corpus, &out),
        Command::Augment {
            corpus,
            records,
            out,
            allow_prepend_train,
            ..
        } => augment(ctx, &corpus, records.as_deref(), &out, allow_prepend_train),
        Command::Predict {
            dataset,
            out,
            reader: ReaderKind::Baseline,
            ..
        } => predict(ctx, &dataset, &out),
        Command::Evaluate {
            dataset,
            predictions,
            format,
            out,
        } => evaluate(ctx, &dataset, &predictions, &format, out.as_deref()),
        Command::Matrix { spec, out } => matrix(ctx, &spec, &out),
        Command::Categorize {
            dataset,
            predictions,
            records,
            exemplars,
            out,
            ..
        } => categorize(ctx, &dataset, &predictions, &records, exemplars, out.as_deref()),
    }
}

fn emit(ctx: &Ctx, out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            ctx.fresh_file(path)?;
            write(path, bytes)
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            if !bytes.ends_with(b"\n") {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ValidateSummary {
    article_count: usize,
    paragraph_count: usize,
    question_count: usize,
}

fn validate(ctx: &Ctx, path: &Path) -> Result<()> {
    let corpus = ctx.load_corpus(path)?;
    let stats = corpus_stats(&corpus);
    let summary = ValidateSummary {
        article_count: stats.article_count,
        paragraph_count: stats.paragraph_count,
        question_count: stats.question_count,
    };
    emit(ctx, None, &serde_json::to_vec_pretty(&summary)?)
}

fn generate(ctx: &Ctx, corpus_path: &Path, out: &Path) -> Result<()> {
    let corpus = ctx.load_corpus(corpus_path)?;
    let cfg = &ctx.config;
    ctx.fresh_dir(out)?;
    let mut inputs = vec![corpus_path];
    let store = match cfg.backend() {
        Backend::RuleBased => {
            let table = match &cfg.generate.swap_table {
                Some(path) => {
                    inputs.push(path);
                    SwapTable::parse(&read_text(path)?)
                        .with_context(|| format!("loading swap table {}", path.display()))?
                }
                None => SwapTable::starter(),
            };
            let mut gen = GenerationConfig::new(cfg.seed(), table);
            if let Some(n) = cfg.generate.max_template_attempts {
                gen.max_template_attempts = n;
            }
            generate_store(&corpus, &gen)
        }
        Backend::Remote => {
            let endpoint = cfg.endpoint().with_key_from_env();
            if endpoint.api_key.is_none() {
                return Err(llm::LlmError::MissingApiKey.into());
            }
            let demonstrations = match &cfg.generate.demonstrations {
                Some(path) => {
                    inputs.push(path);
                    llm::parse_demonstrations(&read_text(path)?)?
                }
                None => llm::default_demonstrations(),
            };
            let cache_dir = cfg.generate.cache_dir.clone().unwrap_or_else(|| out.join("llm-cache"));
            let backend = LlmBackend::new(
                endpoint,
                demonstrations,
                Box::new(HttpTransport),
                Box::new(SystemClock::default()),
                Some(ResponseCache::open(cache_dir)?),
            );
            let store = backend.generate_store(&corpus)?;
            eprintln!("sent {} request(s)", backend.request_count());
            store
        }
    };
    let summary = store.summary();
    write(&out.join("records.json"), store.to_json())?;
    write(&out.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    write_provenance(out, cfg, &inputs)?;
    eprintln!(
        "{} of {} questions accepted; records in {}",
        summary.accepted,
        summary.total,
        out.display()
    );
    Ok(())
}

fn augment_settings(config: &RunConfig, split: Split, allow_prepend_train: bool) -> Result<Vec<(usize, Placement)>> {
    let ks = config.augment.k.clone();
    let placements = config.augment.placements.clone();
    let settings: Vec<(usize, Placement)> = match (ks, placements, split) {
        (None, None, Split::Eval) => standard_eval_settings(),
        (ks, placements, _) => {
            let ks = ks.unwrap_or_else(|| (0..=MAX_K).collect());
            let placements = placements.unwrap_or_else(|| vec![Placement::Append]);
            let mut out = Vec::new();
            for p in &placements {
                for &k in &ks {
                    if k > MAX_K {
                        return Err(usage(format!("k = {k} is out of range (0..=5)")));
                    }
                    if *p == Placement::Prepend && k == 0 {
                        continue;
                    }
                    out.push((k, *p));
                }
            }
            out
        }
    };
    if split == Split::Train && !allow_prepend_train && settings.iter().any(|(_, p)| *p == Placement::Prepend) {
        return Err(usage("prepend training sets need --allow-prepend-train"));
    }
    if settings.is_empty() {
        return Err(usage("no (k, placement) combination selected"));
    }
    Ok(settings)
}

fn augment(ctx: &Ctx, corpus_path: &Path, records: Option<&Path>, out: &Path, allow_prepend_train: bool) -> Result<()> {
    let split = ctx.config.augment.split.unwrap_or(Split::Eval);
    let settings = augment_settings(&ctx.config, split, allow_prepend_train)?;
    let needs_records = settings.iter().any(|(k, _)| *k > 0);
    let store = match records {
        Some(path) => load_store(path)?,
        None if needs_records => return Err(usage("--records is required for k > 0")),
        None => RecordStore::default(),
    };
    let corpus = ctx.load_corpus(corpus_path)?;
    ctx.fresh_dir(out)?;
    let mut datasets = Vec::new();
    for (k, placement) in settings {
        let ds = build_dataset(&corpus, &store, k, placement, split)?;
        write(&out.join(format!("{}.json", ds.name)), ds.to_bytes())?;
        eprintln!(
            "{}: {} questions, {} dropped",
            ds.name,
            ds.question_count(),
            ds.dropped_questions
        );
        datasets.push(ds);
    }
    let manifest = dataset_manifest(&datasets);
    write(&out.join("manifest.json"), manifest.to_json())?;
    write(&out.join("manifest.csv"), manifest.to_csv())?;
    let mut inputs = vec![corpus_path];
    inputs.extend(records);
    write_provenance(out, &ctx.config, &inputs)
}

fn predict(ctx: &Ctx, dataset: &Path, out: &Path) -> Result<()> {
    let corpus = ctx.load_corpus(dataset)?;
    let mut reader = ReaderConfig {
        stopwords: ctx.stopwords()?,
        ..Default::default()
    };
    if let Some(n) = ctx.config.reader.max_answer_tokens {
        if n == 0 {
            return Err(usage("--max-answer-tokens must be at least 1"));
        }
        reader.max_answer_tokens = n;
    }
    let predictions = predict_dataset(&corpus, &reader);
    ctx.fresh_file(out)?;
    write(out, predictions.to_json())?;
    eprintln!("{} predictions written to {}", predictions.len(), out.display());
    Ok(())
}

fn evaluate(ctx: &Ctx, dataset: &Path, predictions: &Path, format: &str, out: Option<&Path>) -> Result<()> {
    let corpus = ctx.load_corpus(dataset)?;
    let preds = load_predictions(predictions)?;
    let report = score_predictions(&preds, &corpus, &stem_name(dataset), &stem_name(predictions));
    if report.missing_predictions > 0 {
        eprintln!("warning: {} question(s) have no prediction", report.missing_predictions);
    }
    if report.unknown_predictions > 0 {
        eprintln!(
            "warning: {} prediction(s) match no question",
            report.unknown_predictions
        );
    }
    eprintln!("exact_match {:.1} f1 {:.1}", report.mean_em, report.mean_f1);
    let bytes = match format {
        "json" => report.to_json(),
        "csv" => report.to_csv().into_bytes(),
        other => return Err(usage(format!("unsupported format `{other}` (expected json or csv)"))),
    };
    emit(ctx, out, &bytes)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSpec {
    cell: Vec<CellSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSpec {
    predictions: PathBuf,
    dataset: PathBuf,
    row: Option<String>,
    column: Option<String>,
}

fn build_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

fn matrix(ctx: &Ctx, spec_path: &Path, out: &Path) -> Result<()> {
    let spec: RunSpec =
        toml::from_str(&read_text(spec_path)?).with_context(|| format!("parsing {}", spec_path.display()))?;
    if spec.cell.is_empty() {
        return Err(usage("the run spec lists no [[cell]] entries"));
    }
    let base = spec_path.parent().unwrap_or(Path::new(""));
    let mut datasets: BTreeMap<PathBuf, Corpus> = BTreeMap::new();
    let mut predictions: BTreeMap<PathBuf, PredictionSet> = BTreeMap::new();
    let mut hashes = BTreeMap::new();
    let mut named = Vec::new();
    for cell in &spec.cell {
        let d = base.join(&cell.dataset);
        let p = base.join(&cell.predictions);
        if !datasets.contains_key(&d) {
            datasets.insert(d.clone(), ctx.load_corpus(&d)?);
        }
        if !predictions.contains_key(&p) {
            predictions.insert(p.clone(), load_predictions(&p)?);
        }
        let row = cell.row.clone().unwrap_or_else(|| stem_name(&p));
        let column = cell.column.clone().unwrap_or_else(|| stem_name(&d));
        let hash = sha256_hex(&read_bytes(&d)?);
        if let Some(previous) = hashes.insert(column.clone(), hash.clone()) {
            if previous != hash {
                return Err(anyhow!("column `{column}` names two different dataset files"));
            }
        }
        named.push((row, column, p, d));
    }
    let inputs: Vec<CellInput<'_>> = named
        .iter()
        .map(|(row, column, p, d)| CellInput {
            row,
            column,
            predictions: &predictions[p],
            dataset: &datasets[d],
        })
        .collect();
    let report = run_matrix(&inputs, MatrixMetadata::at(build_timestamp(), hashes));
    ctx.fresh_dir(out)?;
    write(&out.join("matrix.json"), export_report(&report, ExportFormat::Json))?;
    write(&out.join("matrix.csv"), export_report(&report, ExportFormat::Csv))?;
    write(&out.join("matrix.md"), export_report(&report, ExportFormat::Markdown))?;
    let mut input_paths: Vec<&Path> = vec![spec_path];
    input_paths.extend(datasets.keys().map(PathBuf::as_path));
    input_paths.extend(predictions.keys().map(PathBuf::as_path));
    write_provenance(out, &ctx.config, &input_paths)?;
    eprintln!("{} cell(s) written to {}", report.cells.len(), out.display());
    Ok(())
}

fn categorize(
    ctx: &Ctx,
    dataset: &Path,
    predictions: &Path,
    records: &Path,
    exemplars: usize,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = ctx.load_corpus(dataset)?;
    let preds = load_predictions(predictions)?;
    let store = load_store(records)?;
    let report = score_predictions(&preds, &corpus, &stem_name(dataset), &stem_name(predictions));
    let breakdown = error_breakdown(&report, &corpus, &store, &ctx.stopwords()?, exemplars);
    for (category, n) in &breakdown.counts {
        eprintln!("{category}: {n} ({:.1}%)", breakdown.percentages[category]);
    }
    emit(ctx, out, &breakdown.to_json())
}
