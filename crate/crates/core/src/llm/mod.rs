//! Provider-agnostic text generation.
//!
//! A [`Gateway`] wraps one [`Provider`] with response caching (in memory and,
//! optionally, content-addressed on disk), retries with exponential backoff for
//! transport failures, and per-role call accounting. Three providers ship:
//!
//! - [`HttpProvider`] - JSON chat-completion endpoint
//! - [`ScriptedProvider`] - fixture-driven responses keyed by role and sample
//! - [`RuleBasedProvider`] - deterministic heuristics standing in for a model

mod cache;
mod http;
mod json;
pub mod prompts;
mod rule_based;
mod scripted;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, warn};

pub use cache::{CacheRecord, DiskCache};
pub use http::HttpProvider;
pub use json::parse_json_payload;
pub use prompts::{render_prompt, CHART_SCHEMA};
pub use rule_based::RuleBasedProvider;
pub use scripted::{Script, ScriptEntry, ScriptedProvider};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("missing prompt slot `{0}`")]
    MissingSlot(String),
    #[error("no JSON object found in response")]
    NoJsonFound,
    #[error("invalid JSON in response: {0}")]
    JsonSyntax(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

impl LlmError {
    fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::Timeout(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Extract,
    Validate,
    Refine,
    ChartType,
    Retrieve,
    Decompose,
    SingleStep,
}

impl RoleTag {
    pub const ALL: [RoleTag; 7] = [
        RoleTag::Extract,
        RoleTag::Validate,
        RoleTag::Refine,
        RoleTag::ChartType,
        RoleTag::Retrieve,
        RoleTag::Decompose,
        RoleTag::SingleStep,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RoleTag::Extract => "extract",
            RoleTag::Validate => "validate",
            RoleTag::Refine => "refine",
            RoleTag::ChartType => "chart_type",
            RoleTag::Retrieve => "retrieve",
            RoleTag::Decompose => "decompose",
            RoleTag::SingleStep => "single_step",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|r| r == self).expect("role listed in ALL")
    }
}

impl fmt::Display for RoleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rendered prompt. `slots` keeps the substituted values so deterministic
/// providers can work from structured input; only `text` reaches a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub role_tag: RoleTag,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

impl Prompt {
    pub fn with_sample_id(mut self, sample_id: Option<&str>) -> Self {
        self.sample_id = sample_id.map(str::to_string);
        self
    }

    pub fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HttpApi,
    Scripted,
    RuleBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "dir")]
pub enum CacheMode {
    Off,
    Memory,
    Disk(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Fixture file for the scripted provider.
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default = "default_cache")]
    pub cache: CacheMode,
}

fn default_retries() -> u32 {
    2
}
fn default_timeout_ms() -> u64 {
    120_000
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_cache() -> CacheMode {
    CacheMode::Memory
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind) -> Self {
        Self {
            kind,
            endpoint: None,
            model_name: None,
            temperature: 0.0,
            max_retries: default_retries(),
            timeout_ms: default_timeout_ms(),
            backoff_ms: default_backoff_ms(),
            api_key_env: None,
            script_path: None,
            cache: default_cache(),
        }
    }

    pub fn rule_based() -> Self {
        Self::new(ProviderKind::RuleBased)
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self { endpoint: Some(endpoint.into()), model_name: Some(model.into()), ..Self::new(ProviderKind::HttpApi) }
    }

    pub fn with_cache(mut self, cache: CacheMode) -> Self {
        self.cache = cache;
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.kind == ProviderKind::HttpApi && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(LlmError::Config("http_api provider requires an endpoint".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config("temperature must be a finite number >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmResponse {
    pub text: String,
    pub cached: bool,
    #[serde(skip)]
    pub latency: Duration,
}

/// Something that turns a prompt into text. Implementations must be safe to
/// call from several threads.
pub trait Provider: Send + Sync {
    fn generate(&self, prompt: &Prompt, config: &ProviderConfig) -> Result<String, LlmError>;
}

/// Per-role counters of gateway traffic.
#[derive(Debug, Default)]
struct Counters {
    requests: [AtomicUsize; 7],
    provider_calls: [AtomicUsize; 7],
    cache_hits: AtomicUsize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CallStats {
    /// Calls to [`Gateway::complete`] per role.
    pub requests: BTreeMap<RoleTag, usize>,
    /// Calls that reached the provider (cache misses, including retries).
    pub provider_calls: BTreeMap<RoleTag, usize>,
    pub cache_hits: usize,
}

impl CallStats {
    pub fn requests_for(&self, role: RoleTag) -> usize {
        self.requests.get(&role).copied().unwrap_or(0)
    }

    pub fn total_provider_calls(&self) -> usize {
        self.provider_calls.values().sum()
    }
}

pub struct Gateway {
    provider: Box<dyn Provider>,
    config: ProviderConfig,
    memory: Option<Mutex<HashMap<String, String>>>,
    disk: Option<DiskCache>,
    counters: Counters,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>, config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let (memory, disk) = match &config.cache {
            CacheMode::Off => (None, None),
            CacheMode::Memory => (Some(Mutex::new(HashMap::new())), None),
            CacheMode::Disk(dir) => (Some(Mutex::new(HashMap::new())), Some(DiskCache::open(dir)?)),
        };
        Ok(Self { provider, config, memory, disk, counters: Counters::default() })
    }

    /// Build the provider named by `config.kind`.
    pub fn from_config(config: ProviderConfig) -> Result<Self, LlmError> {
        let provider: Box<dyn Provider> = match config.kind {
            ProviderKind::RuleBased => Box::new(RuleBasedProvider::new()),
            ProviderKind::HttpApi => Box::new(HttpProvider::new(&config)?),
            ProviderKind::Scripted => {
                let path = config
                    .script_path
                    .as_ref()
                    .ok_or_else(|| LlmError::Config("scripted provider requires script_path".into()))?;
                Box::new(ScriptedProvider::from_file(path)?)
            }
        };
        Self::new(provider, config)
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Cache key: SHA-256 over role, prompt text, model name and temperature.
    pub fn cache_key(&self, prompt: &Prompt) -> String {
        let material = serde_json::json!([
            prompt.role_tag.as_str(),
            prompt.text,
            self.config.model_name.as_deref().unwrap_or(""),
            self.config.temperature,
        ]);
        hex::encode(Sha256::digest(material.to_string().as_bytes()))
    }

    pub fn complete(&self, prompt: &Prompt) -> Result<LlmResponse, LlmError> {
        let start = Instant::now();
        let role = prompt.role_tag.index();
        self.counters.requests[role].fetch_add(1, Ordering::Relaxed);
        if prompt.text.trim().is_empty() {
            return Err(LlmError::Config("prompt text is empty".into()));
        }
        let key = self.cache_key(prompt);
        if let Some(text) = self.lookup(&key) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(LlmResponse { text, cached: true, latency: start.elapsed() });
        }

        let mut attempt = 0;
        let text = loop {
            self.counters.provider_calls[role].fetch_add(1, Ordering::Relaxed);
            match self.provider.generate(prompt, &self.config) {
                Ok(text) => break text,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let backoff = Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << attempt.min(16)));
                    warn!(role = %prompt.role_tag, attempt, ?backoff, "provider call failed, retrying: {e}");
                    std::thread::sleep(backoff);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        self.store(&key, prompt, &text);
        debug!(role = %prompt.role_tag, "completed in {:?}", start.elapsed());
        Ok(LlmResponse { text, cached: false, latency: start.elapsed() })
    }

    fn lookup(&self, key: &str) -> Option<String> {
        let memory = self.memory.as_ref()?;
        if let Some(hit) = memory.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let record = self.disk.as_ref()?.get(key)?;
        memory.lock().expect("cache lock").insert(key.to_string(), record.response.clone());
        Some(record.response)
    }

    fn store(&self, key: &str, prompt: &Prompt, text: &str) {
        if let Some(memory) = &self.memory {
            memory.lock().expect("cache lock").insert(key.to_string(), text.to_string());
        }
        if let Some(disk) = &self.disk {
            let record = CacheRecord {
                prompt: prompt.text.clone(),
                response: text.to_string(),
                model: self.config.model_name.clone().unwrap_or_default(),
                timestamp: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            if let Err(e) = disk.put(key, &record) {
                warn!("failed to persist cache record {key}: {e}");
            }
        }
    }

    pub fn stats(&self) -> CallStats {
        let mut stats =
            CallStats { cache_hits: self.counters.cache_hits.load(Ordering::Relaxed), ..Default::default() };
        for role in RoleTag::ALL {
            let i = role.index();
            let requests = self.counters.requests[i].load(Ordering::Relaxed);
            let calls = self.counters.provider_calls[i].load(Ordering::Relaxed);
            if requests > 0 {
                stats.requests.insert(role, requests);
            }
            if calls > 0 {
                stats.provider_calls.insert(role, calls);
            }
        }
        stats
    }
}

/// A gateway bound to one sample, so scripted fixtures can key on it.
#[derive(Debug, Clone, Copy)]
pub struct Session<'a> {
    pub gateway: &'a Gateway,
    pub sample_id: Option<&'a str>,
}

impl<'a> Session<'a> {
    pub fn new(gateway: &'a Gateway, sample_id: Option<&'a str>) -> Self {
        Self { gateway, sample_id }
    }

    pub fn prompt(&self, role: RoleTag, slots: &BTreeMap<String, String>) -> Result<Prompt, LlmError> {
        Ok(render_prompt(role, slots)?.with_sample_id(self.sample_id))
    }

    pub fn send(&self, prompt: &Prompt) -> Result<String, LlmError> {
        self.gateway.complete(prompt).map(|r| r.text)
    }

    pub fn call(&self, role: RoleTag, slots: &BTreeMap<String, String>) -> Result<String, LlmError> {
        self.send(&self.prompt(role, slots)?)
    }
}

/// One-shot convenience: build a gateway from `config` and complete `prompt`.
pub fn complete(prompt: &Prompt, config: &ProviderConfig) -> Result<LlmResponse, LlmError> {
    Gateway::from_config(config.clone())?.complete(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    struct Flaky {
        failures: AtomicUsize,
        calls: Arc<AtomicUsize>,
    }

    impl Provider for Flaky {
        fn generate(&self, _: &Prompt, _: &ProviderConfig) -> Result<String, LlmError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(LlmError::Transport("connection reset".into()));
            }
            Ok("{}".into())
        }
    }

    fn prompt(text: &str) -> Prompt {
        Prompt { role_tag: RoleTag::Extract, text: text.into(), sample_id: None, slots: BTreeMap::new() }
    }

    fn quick(kind: ProviderKind) -> ProviderConfig {
        ProviderConfig { backoff_ms: 1, ..ProviderConfig::new(kind) }
    }

    #[test]
    fn retries_then_succeeds() {
        let calls = Arc::new(AtomicUsize::new(0));
        let provider = Flaky { failures: AtomicUsize::new(2), calls: calls.clone() };
        let gw = Gateway::new(Box::new(provider), quick(ProviderKind::RuleBased)).unwrap();
        assert_eq!(gw.complete(&prompt("p")).unwrap().text, "{}");
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let calls = Arc::new(AtomicUsize::new(0));
        let provider = Flaky { failures: AtomicUsize::new(10), calls: calls.clone() };
        let gw = Gateway::new(Box::new(provider), quick(ProviderKind::RuleBased)).unwrap();
        assert!(matches!(gw.complete(&prompt("p")), Err(LlmError::Transport(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn memory_cache_hits() {
        let calls = Arc::new(AtomicUsize::new(0));
        let provider = Flaky { failures: AtomicUsize::new(0), calls: calls.clone() };
        let gw = Gateway::new(Box::new(provider), quick(ProviderKind::RuleBased)).unwrap();
        assert!(!gw.complete(&prompt("p")).unwrap().cached);
        assert!(gw.complete(&prompt("p")).unwrap().cached);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let stats = gw.stats();
        assert_eq!(stats.requests_for(RoleTag::Extract), 2);
        assert_eq!(stats.total_provider_calls(), 1);
    }

    #[test]
    fn cache_key_depends_on_model_and_temperature() {
        let a = Gateway::from_config(ProviderConfig::rule_based()).unwrap();
        let mut cfg = ProviderConfig::rule_based();
        cfg.temperature = 0.7;
        let b = Gateway::from_config(cfg).unwrap();
        assert_ne!(a.cache_key(&prompt("p")), b.cache_key(&prompt("p")));
        assert_eq!(a.cache_key(&prompt("p")), a.cache_key(&prompt("p")));
    }

    #[test]
    fn http_requires_endpoint() {
        assert!(matches!(Gateway::from_config(ProviderConfig::new(ProviderKind::HttpApi)), Err(LlmError::Config(_))));
    }
}
