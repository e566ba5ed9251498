//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{Placement, Split};
use crate::llm::EndpointConfig;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    RuleBased,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub backend: Option<Backend>,
    pub swap_table: Option<PathBuf>,
    pub max_template_attempts: Option<usize>,
    pub demonstrations: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub k: Option<Vec<usize>>,
    pub placements: Option<Vec<Placement>>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReaderSection {
    pub stopwords: Option<PathBuf>,
    pub max_answer_tokens: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    pub temperature: Option<f64>,
    pub max_retries: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub requests_per_minute: Option<u32>,
}

/// Every field is optional so a file and a set of flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub reader: ReaderSection,
    #[serde(default)]
    pub endpoint: EndpointSection,
}

macro_rules! layer {
    ($base:expr, $over:expr; $($field:ident).+) => {
        if $over.$($field).+.is_some() {
            $base.$($field).+ = $over.$($field).+.clone();
        }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        layer!(self, flags; seed);
        layer!(self, flags; jobs);
        layer!(self, flags; paths.corpus);
        layer!(self, flags; paths.records);
        layer!(self, flags; paths.output);
        layer!(self, flags; generate.backend);
        layer!(self, flags; generate.swap_table);
        layer!(self, flags; generate.max_template_attempts);
        layer!(self, flags; generate.demonstrations);
        layer!(self, flags; generate.cache_dir);
        layer!(self, flags; augment.k);
        layer!(self, flags; augment.placements);
        layer!(self, flags; augment.split);
        layer!(self, flags; reader.stopwords);
        layer!(self, flags; reader.max_answer_tokens);
        layer!(self, flags; endpoint.base_url);
        layer!(self, flags; endpoint.model_name);
        layer!(self, flags; endpoint.temperature);
        layer!(self, flags; endpoint.max_retries);
        layer!(self, flags; endpoint.timeout_secs);
        layer!(self, flags; endpoint.requests_per_minute);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn backend(&self) -> Backend {
        self.generate.backend.unwrap_or(Backend::RuleBased)
    }

    pub fn endpoint(&self) -> EndpointConfig {
        let d = EndpointConfig::default();
        let e = &self.endpoint;
        EndpointConfig {
            base_url: e.base_url.clone().unwrap_or(d.base_url),
            model_name: e.model_name.clone().unwrap_or(d.model_name),
            api_key: None,
            temperature: e.temperature.unwrap_or(d.temperature),
            max_retries: e.max_retries.unwrap_or(d.max_retries),
            timeout: e
                .timeout_secs
                .and_then(|s| Duration::try_from_secs_f64(s).ok())
                .filter(|t| !t.is_zero())
                .unwrap_or(d.timeout),
            requests_per_minute: e.requests_per_minute.unwrap_or(d.requests_per_minute),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
