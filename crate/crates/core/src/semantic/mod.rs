//! Intent descriptions and their embeddings.
//!
//! A [`Semantics`] service wraps an optional live [`Provider`] (chat +
//! embeddings), the on-disk [`EmbeddingCache`], and the deterministic
//! offline fallbacks. Every returned embedding is unit-normalised.

mod cache;
mod http;
pub mod offline;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{sha256_hex, EmbeddingCache};
pub use http::HttpProvider;

use crate::sva::{Assertion, SignalFilter};

pub const API_KEY_ENV: &str = "COVERASSERT_API_KEY";

pub mod prompts {
    pub const INTENT: &str = include_str!("../../prompts/intent_v1.txt");
    pub const GROUP: &str = include_str!("../../prompts/group_v1.txt");
    pub const SPLIT: &str = include_str!("../../prompts/split_v1.txt");
    pub const POINTS: &str = include_str!("../../prompts/points_v1.txt");
    pub const REPAIR: &str = include_str!("../../prompts/repair_v1.txt");
    pub const GENERATE: &str = include_str!("../../prompts/generate_v1.txt");

    /// Substitutes `{key}` placeholders.
    pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
        let mut out = template.to_string();
        for (k, v) in vars {
            out = out.replace(&format!("{{{k}}}"), v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    #[default]
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    /// Base URL of an OpenAI-compatible API (live only).
    pub endpoint: Option<String>,
    /// Chat model used for intents, group descriptions and splitting.
    pub model_name: String,
    /// Embedding model; defaults to `model_name`.
    pub embed_model: Option<String>,
    pub embed_dim: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub retry_base_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Offline,
            endpoint: None,
            model_name: "gpt-4o".into(),
            embed_model: None,
            embed_dim: 4096,
            max_in_flight: 4,
            timeout_secs: 60,
            retry_base_ms: 250,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.embed_dim < 8 {
            return Err(format!("embed_dim must be at least 8, got {}", self.embed_dim));
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be positive".into());
        }
        if self.mode == ProviderMode::Live && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err("live mode requires an endpoint".into());
        }
        Ok(())
    }

    fn embed_model(&self) -> &str {
        self.embed_model.as_deref().unwrap_or(&self.model_name)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("unexpected provider reply: {0}")]
    BadReply(String),
    #[error("no live provider configured")]
    Offline,
}

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("embedding width {got} does not match configured {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("text #{0} to embed is empty")]
    EmptyText(usize),
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid provider config: {0}")]
    Config(String),
}

/// Chat and embedding backend.
pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Intent {
    pub text: String,
    /// Set when a live request failed and the offline template was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentRecord {
    pub assertion_id: String,
    pub intent_text: String,
    pub embedding: Vec<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SemanticStats {
    /// Texts sent to (or computed by) the embedding backend.
    pub embed_misses: usize,
    /// Texts served from the in-memory or on-disk cache.
    pub cache_hits: usize,
    pub completions: usize,
    pub fallbacks: usize,
}

pub struct Semantics {
    config: ProviderConfig,
    seed: u64,
    provider: Option<Box<dyn Provider>>,
    cache: Option<EmbeddingCache>,
    memo: Mutex<HashMap<String, Vec<f64>>>,
    intents: Mutex<HashMap<String, Intent>>,
    stats: Mutex<SemanticStats>,
}

pub fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical vectors
    // then give exactly 1
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

impl Semantics {
    /// Builds the service for `config`. Live mode reads the API key from
    /// `COVERASSERT_API_KEY`.
    pub fn new(config: ProviderConfig, seed: u64, cache_dir: Option<&Path>) -> Result<Self, SemanticError> {
        config.validate().map_err(SemanticError::Config)?;
        let provider: Option<Box<dyn Provider>> = match config.mode {
            ProviderMode::Offline => None,
            ProviderMode::Live => Some(Box::new(HttpProvider::new(
                config.endpoint.as_deref().unwrap_or_default(),
                &config.model_name,
                config.embed_model(),
                std::env::var(API_KEY_ENV).ok(),
                Duration::from_secs(config.timeout_secs),
            ))),
        };
        Self::build(config, seed, provider, cache_dir)
    }

    pub fn offline(embed_dim: usize, seed: u64) -> Self {
        let config = ProviderConfig { embed_dim, ..ProviderConfig::default() };
        Self::build(config, seed, None, None).expect("offline setup has no fallible parts")
    }

    pub fn offline_with_cache(embed_dim: usize, seed: u64, cache_dir: &Path) -> Self {
        let config = ProviderConfig { embed_dim, ..ProviderConfig::default() };
        Self::build(config, seed, None, Some(cache_dir)).expect("cache directory must be creatable")
    }

    /// Live-mode service over a caller-supplied backend.
    pub fn with_provider(
        config: ProviderConfig,
        seed: u64,
        provider: Box<dyn Provider>,
        cache_dir: Option<&Path>,
    ) -> Result<Self, SemanticError> {
        let config = ProviderConfig { mode: ProviderMode::Live, ..config };
        Self::build(config, seed, Some(provider), cache_dir)
    }

    fn build(
        config: ProviderConfig,
        seed: u64,
        provider: Option<Box<dyn Provider>>,
        cache_dir: Option<&Path>,
    ) -> Result<Self, SemanticError> {
        let cache = cache_dir.map(EmbeddingCache::open).transpose()?;
        Ok(Semantics {
            config,
            seed,
            provider,
            cache,
            memo: Mutex::new(HashMap::new()),
            intents: Mutex::new(HashMap::new()),
            stats: Mutex::new(SemanticStats::default()),
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn is_live(&self) -> bool {
        self.provider.is_some()
    }

    pub fn stats(&self) -> SemanticStats {
        *self.stats.lock().unwrap()
    }

    /// Cache key naming the embedding backend.
    fn model_key(&self) -> String {
        match self.provider {
            Some(_) => format!("live:{}", self.config.embed_model()),
            None => format!("offline-hash-v1:seed={}", self.seed),
        }
    }

    fn with_retry<T>(&self, mut f: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        const ATTEMPTS: u32 = 3;
        const CAP_MS: u64 = 4_000;
        let mut attempt = 0;
        loop {
            match f() {
                Err(ProviderError::Unavailable(msg)) if attempt + 1 < ATTEMPTS => {
                    let delay = (self.config.retry_base_ms << attempt).min(CAP_MS);
                    log::warn!("provider unavailable ({msg}); retrying in {delay} ms");
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    /// Chat completion with retries. Errors with `Offline` when no live
    /// provider is configured.
    pub fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let provider = self.provider.as_ref().ok_or(ProviderError::Offline)?;
        let out = self.with_retry(|| provider.complete(prompt));
        if out.is_ok() {
            self.stats.lock().unwrap().completions += 1;
        }
        out
    }

    pub fn describe_intent(&self, assertion: &Assertion, filter: &SignalFilter) -> Intent {
        if let Some(hit) = self.intents.lock().unwrap().get(&assertion.text) {
            return hit.clone();
        }
        let intent = match &self.provider {
            None => Intent { text: offline::canonical_intent(&assertion.text, filter), fallback: false },
            Some(_) => {
                let prompt = prompts::render(prompts::INTENT, &[("assertion", &assertion.text)]);
                match self.complete(&prompt) {
                    Ok(text) if !text.trim().is_empty() => Intent { text, fallback: false },
                    other => {
                        if let Err(e) = other {
                            log::warn!("intent for `{}` fell back to template: {e}", assertion.id);
                        }
                        self.stats.lock().unwrap().fallbacks += 1;
                        Intent { text: offline::canonical_intent(&assertion.text, filter), fallback: true }
                    }
                }
            }
        };
        self.intents.lock().unwrap().insert(assertion.text.clone(), intent.clone());
        intent
    }

    /// Intents for every assertion, in input order. Live requests run
    /// concurrently up to `max_in_flight`.
    pub fn describe_all(&self, assertions: &[Assertion], filter: &SignalFilter) -> Vec<Intent> {
        if self.provider.is_none() {
            return assertions.iter().map(|a| self.describe_intent(a, filter)).collect();
        }
        let mut out = Vec::with_capacity(assertions.len());
        for chunk in assertions.chunks(self.config.max_in_flight) {
            let results: Vec<Intent> = thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|a| s.spawn(move || self.describe_intent(a, filter))).collect();
                handles.into_iter().map(|h| h.join().expect("intent worker panicked")).collect()
            });
            out.extend(results);
        }
        out
    }

    /// Unit-normalised embeddings, one row per text, in input order.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, SemanticError> {
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(SemanticError::EmptyText(i));
        }
        let dim = self.dim();
        let key = self.model_key();
        let mut found: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut misses: Vec<&str> = Vec::new();
        {
            let memo = self.memo.lock().unwrap();
            let mut stats = self.stats.lock().unwrap();
            for t in texts {
                if found.contains_key(t.as_str()) || misses.contains(&t.as_str()) {
                    continue;
                }
                let hit = memo.get(t).cloned().or_else(|| self.cache.as_ref().and_then(|c| c.get(&key, t, dim)));
                match hit {
                    Some(v) => {
                        stats.cache_hits += 1;
                        found.insert(t, v);
                    }
                    None => misses.push(t),
                }
            }
            stats.embed_misses += misses.len();
        }
        if !misses.is_empty() {
            let fresh: Vec<Vec<f64>> = match &self.provider {
                None => misses.iter().map(|t| offline::hash_embedding(t, dim, self.seed)).collect(),
                Some(p) => {
                    let mut rows = Vec::with_capacity(misses.len());
                    for chunk in misses.chunks(64) {
                        let owned: Vec<String> = chunk.iter().map(|s| s.to_string()).collect();
                        let got = self.with_retry(|| p.embed(&owned))?;
                        for mut row in got {
                            if row.len() != dim {
                                return Err(SemanticError::DimensionMismatch { expected: dim, got: row.len() });
                            }
                            if !normalize(&mut row) {
                                return Err(ProviderError::BadReply("zero or non-finite embedding".into()).into());
                            }
                            rows.push(row);
                        }
                    }
                    rows
                }
            };
            let mut memo = self.memo.lock().unwrap();
            for (t, v) in misses.iter().zip(fresh) {
                if let Some(c) = &self.cache {
                    c.put(&key, t, &v)?;
                }
                memo.insert(t.to_string(), v.clone());
                found.insert(t, v);
            }
        }
        Ok(texts.iter().map(|t| found[t.as_str()].clone()).collect())
    }

    /// Intent text plus embedding for each assertion.
    pub fn intent_records(&self, assertions: &[Assertion], filter: &SignalFilter) -> Result<Vec<IntentRecord>, SemanticError> {
        let intents = self.describe_all(assertions, filter);
        let texts: Vec<String> = intents.iter().map(|i| i.text.clone()).collect();
        let rows = if texts.is_empty() { Vec::new() } else { self.embed_batch(&texts)? };
        Ok(assertions
            .iter()
            .zip(intents)
            .zip(rows)
            .map(|((a, i), embedding)| IntentRecord {
                assertion_id: a.id.clone(),
                intent_text: i.text,
                embedding,
                fallback: i.fallback,
            })
            .collect())
    }
}
