//! Semantic retrieval over past decisions: embedders and an in-memory vector
//! store with exact cosine top-k search, persisted as JSON lines.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, EmbedderKind, ProviderKind};
use crate::llm::{OpenAiCompatible, API_KEY_ENV};

pub const HASHING_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: store holds {expected}-d vectors, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector for `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("empty vector for `{0}`")]
    EmptyVector(String),
    #[error("{path}:{line}: {message}")]
    Load { path: PathBuf, line: usize, message: String },
    #[error("store i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding provider: {0}")]
    Provider(String),
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

/// Signed feature hashing of lowercase alphanumeric tokens, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: HASHING_DIMENSION }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dimension as u64) as usize] += sign;
        }
        let norm = l2_norm(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct ProviderEmbedder {
    client: OpenAiCompatible,
    model: String,
    dimension: usize,
}

impl ProviderEmbedder {
    pub fn new(client: OpenAiCompatible, model: impl Into<String>, dimension: usize) -> Self {
        Self { client, model: model.into(), dimension }
    }
}

impl Embedder for ProviderEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let v = self.client.embed(&self.model, text).map_err(|e| RetrievalError::Provider(e.message))?;
        if v.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, actual: v.len() });
        }
        Ok(v)
    }
}

pub fn embedder_from_config(config: &Config) -> Result<Box<dyn Embedder>, RetrievalError> {
    match config.retrieval.embedder {
        EmbedderKind::Hashing => Ok(Box::new(HashingEmbedder::default())),
        EmbedderKind::Openai => {
            let key = std::env::var(API_KEY_ENV)
                .map_err(|_| RetrievalError::Provider(format!("{API_KEY_ENV} is not set")))?;
            let client = OpenAiCompatible::new(
                ProviderKind::Openai,
                config.llm.base_url.clone(),
                key,
                Duration::from_secs(config.llm.timeout_secs),
            );
            let dimension = match config.retrieval.embedding_model.as_str() {
                "text-embedding-3-large" => 3072,
                _ => 1536,
            };
            Ok(Box::new(ProviderEmbedder::new(client, config.retrieval.embedding_model.clone(), dimension)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedDoc {
    pub doc_id: String,
    pub text: String,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl EmbeddedDoc {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, vector: Vec<f64>) -> Self {
        Self { doc_id: doc_id.into(), text: text.into(), vector, metadata: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    pub text: String,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; a zero vector scores 0 against everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| (x / na) * (y / nb)).sum();
    dot.clamp(-1.0, 1.0)
}

/// Exact-search vector store keyed by `doc_id`. Shared access follows the
/// usual borrow rules: any number of `&` readers or one `&mut` writer.
#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    dimension: Option<usize>,
    docs: BTreeMap<String, EmbeddedDoc>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn get(&self, doc_id: &str) -> Option<&EmbeddedDoc> {
        self.docs.get(doc_id)
    }

    pub fn docs(&self) -> impl Iterator<Item = &EmbeddedDoc> {
        self.docs.values()
    }

    /// Inserts or replaces the document with the same `doc_id`.
    pub fn add(&mut self, doc: EmbeddedDoc) -> Result<(), RetrievalError> {
        if doc.vector.is_empty() {
            return Err(RetrievalError::EmptyVector(doc.doc_id));
        }
        if doc.vector.iter().any(|x| !x.is_finite()) {
            return Err(RetrievalError::NonFinite(doc.doc_id));
        }
        match self.dimension {
            Some(d) if d != doc.vector.len() => {
                return Err(RetrievalError::DimensionMismatch { expected: d, actual: doc.vector.len() });
            }
            _ => self.dimension = Some(doc.vector.len()),
        }
        self.docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    /// Exact top-`k` by cosine similarity: descending score, ties by ascending `doc_id`.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<SearchHit>, RetrievalError> {
        let Some(d) = self.dimension else { return Ok(Vec::new()) };
        if query.len() != d {
            return Err(RetrievalError::DimensionMismatch { expected: d, actual: query.len() });
        }
        let mut scored: Vec<(f64, &EmbeddedDoc)> =
            self.docs.values().map(|doc| (cosine(query, &doc.vector), doc)).collect();
        let by_rank = |a: &(f64, &EmbeddedDoc), b: &(f64, &EmbeddedDoc)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.doc_id.cmp(&b.1.doc_id))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(score, doc)| SearchHit { doc_id: doc.doc_id.clone(), score, text: doc.text.clone() })
            .collect())
    }

    /// Writes one JSON object per line, in `doc_id` order. An empty store writes an empty file.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let io = |source| RetrievalError::Io { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for doc in self.docs.values() {
            let line = serde_json::to_string(doc).expect("documents always serialize");
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file =
            std::fs::File::open(path).map_err(|source| RetrievalError::Io { path: path.to_path_buf(), source })?;
        let mut store = Self::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let err = |message: String| RetrievalError::Load { path: path.to_path_buf(), line: i + 1, message };
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: EmbeddedDoc = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            store.add(doc).map_err(|e| err(e.to_string()))?;
        }
        Ok(store)
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn open_or_new(path: &Path) -> Result<Self, RetrievalError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }
}
