//! Run configuration, loaded from a single JSON document.
//!
//! Every section is optional; omitted keys take their defaults. Unknown keys
//! are rejected so that typos surface at startup.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adr::SourceConfig;

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;
pub const DEFAULT_BUDGET_TOKENS: usize = 24_000;
pub const DEFAULT_MAX_FILE_BYTES: u64 = 1024 * 1024;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub max_iterations: u32,
    pub output_dir: PathBuf,
    pub pipeline: SourceConfig,
    /// Seeds backoff jitter and study-bundle label shuffling.
    pub seed: u64,
    pub llm: LlmConfig,
    pub extract: ExtractConfig,
    pub retrieval: RetrievalConfig,
    /// Per-agent overrides keyed by agent name (`repo_summarizer`, `adr_generator`, ...).
    pub agents: BTreeMap<String, AgentOverride>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            output_dir: PathBuf::from("akm-out"),
            pipeline: SourceConfig::Agentic,
            seed: 0,
            llm: LlmConfig::default(),
            extract: ExtractConfig::default(),
            retrieval: RetrievalConfig::default(),
            agents: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Replays a fixed list of replies from `llm.script_path`.
    Scripted,
    /// OpenAI chat-completions API.
    Openai,
    /// Gemini through its OpenAI-compatible chat-completions endpoint.
    Gemini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: ProviderKind,
    pub model_id: String,
    pub retry_budget: u32,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Overrides the provider's default API root.
    pub base_url: Option<String>,
    pub script_path: Option<PathBuf>,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Openai,
            model_id: "gpt-5".into(),
            retry_budget: 3,
            max_output_tokens: 8192,
            temperature: 0.0,
            base_url: None,
            script_path: None,
            backoff_base_ms: 1000,
            timeout_secs: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub budget_tokens: usize,
    pub max_file_bytes: u64,
    pub extra_ignores: Vec<String>,
    pub weights: RankWeights,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            extra_ignores: Vec::new(),
            weights: RankWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankWeights {
    pub manifest: f64,
    pub entrypoint: f64,
    pub readme: f64,
    pub source: f64,
    pub depth: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self { manifest: 3.0, entrypoint: 2.0, readme: 2.0, source: 1.0, depth: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hashing,
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub store_path: Option<PathBuf>,
    pub embedder: EmbedderKind,
    pub embedding_model: String,
    pub k: usize,
    /// Upsert accepted ADRs into the store after a run.
    pub index_outputs: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            store_path: None,
            embedder: EmbedderKind::Hashing,
            embedding_model: "text-embedding-3-small".into(),
            k: 3,
            index_outputs: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentOverride {
    pub template_path: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let config: Config =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be >= 1"));
        }
        if self.llm.retry_budget == 0 {
            return Err(invalid("llm.retry_budget", "must be >= 1"));
        }
        if self.llm.max_output_tokens == 0 {
            return Err(invalid("llm.max_output_tokens", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.llm.temperature) {
            return Err(invalid("llm.temperature", "must lie in [0, 1]"));
        }
        if self.llm.model_id.trim().is_empty() {
            return Err(invalid("llm.model_id", "must not be empty"));
        }
        if self.extract.budget_tokens == 0 {
            return Err(invalid("extract.budget_tokens", "must be >= 1"));
        }
        let w = self.extract.weights;
        if [w.manifest, w.entrypoint, w.readme, w.source, w.depth].iter().any(|x| !x.is_finite()) {
            return Err(invalid("extract.weights", "must be finite"));
        }
        if self.retrieval.k == 0 {
            return Err(invalid("retrieval.k", "must be >= 1"));
        }
        Ok(())
    }
}
