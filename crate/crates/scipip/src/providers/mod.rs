//! Contracts for the three external capabilities the pipelines assume — a
//! chat-completion model, a sentence-embedding encoder, and a literature
//! search API — plus deterministic mocks and HTTP-backed implementations.
//!
//! No module outside this one performs network I/O: every caller receives a
//! [`Gateway`] and all provider handles are injected through it.

pub mod http;
pub mod mock;
pub mod templates;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use templates::{bindings, template, template_hashes, PromptTemplate, ProviderStage};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("no binding for placeholder {0:?}")]
    MissingPlaceholder(String),
    #[error("binding {0:?} matches no placeholder")]
    UnusedBinding(String),
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
    #[error("empty text cannot be embedded")]
    EmptyText,
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("authentication failed: {0}")]
    AuthFailed(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider rejected the request: {0}")]
    Rejected(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("provider not configured: {0}")]
    NotConfigured(String),
    #[error("mock has no scripted reply left for {0}")]
    ScriptExhausted(String),
}

impl ProviderError {
    /// Transient failures are retried; everything else surfaces immediately.
    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// A fully rendered chat call: template name kept for routing and caching.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub template: String,
    pub messages: Vec<Message>,
    pub temperature: f32,
    pub max_retries: u32,
    pub stage: ProviderStage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub provider_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LitSearchHit {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub source_id: String,
}

pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

pub trait EmbedProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

pub trait LitSearchProvider: Send + Sync {
    fn id(&self) -> &str;
    fn search(&self, query: &str) -> Result<Vec<LitSearchHit>, ProviderError>;
}

/// 3 attempts, exponential backoff starting at 1 s. Mocks run with zero
/// backoff so tests never sleep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_base: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn no_backoff() -> Self {
        Self { max_attempts: 3, backoff_base: Duration::ZERO }
    }

    fn run<T>(
        &self,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut last = None;
        for attempt in 0..self.max_attempts {
            match call() {
                Ok(value) => return Ok(value),
                Err(err) if err.is_transient() => {
                    if attempt + 1 < self.max_attempts && !self.backoff_base.is_zero() {
                        std::thread::sleep(self.backoff_base * 2u32.pow(attempt));
                    }
                    last = Some(err);
                }
                Err(err) => return Err(err),
            }
        }
        Err(ProviderError::RetriesExhausted {
            attempts: self.max_attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }
}

/// Shared handle bundling the three providers with retry policy and the
/// parallelism bound. Clones share the underlying providers, so the whole
/// gateway is safe to hand to worker threads.
#[derive(Clone)]
pub struct Gateway {
    chat_default: Arc<dyn ChatProvider>,
    chat_overrides: BTreeMap<ProviderStage, Arc<dyn ChatProvider>>,
    embedder: Arc<dyn EmbedProvider>,
    searcher: Arc<dyn LitSearchProvider>,
    pub retry: RetryPolicy,
    pub parallelism: usize,
    pub embedding_dim: usize,
}

/// Hard cap on hits returned to callers from any search query.
pub const MAX_SEARCH_HITS: usize = 10;

impl Gateway {
    pub fn new(
        chat: Arc<dyn ChatProvider>,
        embed: Arc<dyn EmbedProvider>,
        search: Arc<dyn LitSearchProvider>,
        retry: RetryPolicy,
        parallelism: usize,
        embedding_dim: usize,
    ) -> Self {
        Self {
            chat_default: chat,
            chat_overrides: BTreeMap::new(),
            embedder: embed,
            searcher: search,
            retry,
            parallelism: parallelism.max(1),
            embedding_dim,
        }
    }

    /// Fully mocked gateway: seeded chat, hashing encoder, seeded search,
    /// zero backoff. Bit-reproducible for a fixed seed.
    pub fn mock(seed: u64, embedding_dim: usize) -> Self {
        Self::new(
            Arc::new(mock::SeededMockChat::new(seed)),
            Arc::new(mock::HashEmbed::new(embedding_dim)),
            Arc::new(mock::SeededMockSearch::new(seed)),
            RetryPolicy::no_backoff(),
            4,
            embedding_dim,
        )
    }

    /// Routes a stage's chat calls to a dedicated provider.
    pub fn with_chat_override(mut self, stage: ProviderStage, provider: Arc<dyn ChatProvider>) -> Self {
        self.chat_overrides.insert(stage, provider);
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    fn chat_provider(&self, stage: ProviderStage) -> &Arc<dyn ChatProvider> {
        self.chat_overrides.get(&stage).unwrap_or(&self.chat_default)
    }

    /// Sends a rendered request, retrying transient transport failures with
    /// exponential backoff up to the request's retry budget. An empty reply
    /// is a distinct, non-retried refusal.
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let provider = self.chat_provider(request.stage);
        let policy = RetryPolicy {
            max_attempts: request.max_retries.max(1),
            backoff_base: self.retry.backoff_base,
        };
        let started = Instant::now();
        let text = policy.run(|| provider.chat(request))?;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyResponse);
        }
        Ok(ChatResponse {
            text,
            provider_id: provider.id().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Renders `template` with `bindings` (fresh conversation) and sends it.
    pub fn chat_template(
        &self,
        template_name: &str,
        binds: &BTreeMap<String, String>,
    ) -> Result<ChatResponse, ProviderError> {
        let request = self.build_request(template_name, binds, &[])?;
        self.chat(&request)
    }

    /// Builds a request from a template, bindings and prior turns. `history`
    /// is inserted between the system message and the rendered user turn.
    pub fn build_request(
        &self,
        template_name: &str,
        binds: &BTreeMap<String, String>,
        history: &[Message],
    ) -> Result<ChatRequest, ProviderError> {
        let tpl = template(template_name)?;
        let mut messages = Vec::new();
        let system = tpl.render_system(binds)?;
        if !system.trim().is_empty() {
            messages.push(Message::system(system));
        }
        messages.extend_from_slice(history);
        messages.push(Message::user(tpl.render(binds)?));
        Ok(ChatRequest {
            template: tpl.name.to_string(),
            messages,
            temperature: tpl.temperature,
            max_retries: self.retry.max_attempts,
            stage: tpl.stage,
        })
    }

    /// Embeds non-empty text and normalizes the result to unit length.
    pub fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let raw = self.retry.run(|| self.embedder.embed(text))?;
        if raw.len() != self.embedding_dim {
            return Err(ProviderError::Transport(format!(
                "encoder returned dimension {}, expected {}",
                raw.len(),
                self.embedding_dim
            )));
        }
        normalize_unit(&raw).ok_or(ProviderError::EmptyResponse)
    }

    /// Literature search, truncated to [`MAX_SEARCH_HITS`]. An empty result
    /// set is a valid outcome, not an error.
    pub fn lit_search(&self, query: &str) -> Result<Vec<LitSearchHit>, ProviderError> {
        if query.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let mut hits = self.retry.run(|| self.searcher.search(query))?;
        hits.truncate(MAX_SEARCH_HITS);
        Ok(hits)
    }
}

/// Rescales to unit L2 norm; `None` for the zero vector.
pub fn normalize_unit(v: &[f32]) -> Option<Vec<f32>> {
    let norm = crate::corpus::l2_norm(v);
    if norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| ((*x as f64) / norm) as f32).collect())
}
