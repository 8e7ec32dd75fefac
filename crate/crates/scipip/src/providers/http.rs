//! HTTP-backed providers speaking the common JSON chat-completions and
//! embeddings contracts, plus a Semantic Scholar-style paper search client.
//!
//! One client serves any backend exposing the same wire shape; endpoint,
//! credential and model name are configuration. Server-side (5xx) and
//! connection failures are transient and retried by the gateway; 4xx
//! responses surface immediately.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatProvider, ChatRequest, EmbedProvider, LitSearchHit, LitSearchProvider, ProviderError, Role};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout: Duration,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: None,
            timeout: Duration::from_secs(120),
        }
    }
}

fn classify_status(status: reqwest::StatusCode, body: &str) -> ProviderError {
    let detail = format!("{}: {}", status, body.chars().take(300).collect::<String>());
    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
        ProviderError::AuthFailed(detail)
    } else if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        ProviderError::RateLimited(detail)
    } else if status.is_server_error() {
        ProviderError::Transport(detail)
    } else {
        ProviderError::Rejected(detail)
    }
}

fn transport(e: reqwest::Error) -> ProviderError {
    ProviderError::Transport(e.to_string())
}

fn client(timeout: Duration) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(transport)
}

/// Chat-completions client: POST `{messages, temperature[, model]}`, read
/// `choices[0].message.content`.
pub struct HttpChat {
    config: HttpProviderConfig,
    id: String,
}

impl HttpChat {
    pub fn new(config: HttpProviderConfig) -> Self {
        let id = format!("http-chat:{}", config.model.as_deref().unwrap_or("default"));
        Self { config, id }
    }
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: Option<String>,
}

impl ChatProvider for HttpChat {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                json!({
                    "role": match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    "content": m.content,
                })
            })
            .collect();
        let mut body = json!({
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(model) = &self.config.model {
            body["model"] = json!(model);
        }

        let mut call = client(self.config.timeout)?.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(transport)?;
        let status = response.status();
        let text = response.text().map_err(transport)?;
        if !status.is_success() {
            return Err(classify_status(status, &text));
        }
        let parsed: ChatCompletion = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Rejected(format!("unexpected chat payload: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|t| !t.trim().is_empty())
            .ok_or(ProviderError::EmptyResponse)
    }
}

/// Embeddings client: POST `{input[, model]}`, read `data[0].embedding`.
pub struct HttpEmbed {
    config: HttpProviderConfig,
    id: String,
}

impl HttpEmbed {
    pub fn new(config: HttpProviderConfig) -> Self {
        let id = format!("http-embed:{}", config.model.as_deref().unwrap_or("default"));
        Self { config, id }
    }
}

#[derive(Deserialize)]
struct EmbeddingsPayload {
    data: Vec<EmbeddingRow>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    embedding: Vec<f32>,
}

impl EmbedProvider for HttpEmbed {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let mut body = json!({ "input": text });
        if let Some(model) = &self.config.model {
            body["model"] = json!(model);
        }
        let mut call = client(self.config.timeout)?.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(transport)?;
        let status = response.status();
        let payload = response.text().map_err(transport)?;
        if !status.is_success() {
            return Err(classify_status(status, &payload));
        }
        let parsed: EmbeddingsPayload = serde_json::from_str(&payload)
            .map_err(|e| ProviderError::Rejected(format!("unexpected embeddings payload: {e}")))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|row| row.embedding)
            .ok_or(ProviderError::EmptyResponse)
    }
}

pub const DEFAULT_S2_ENDPOINT: &str = "https://api.semanticscholar.org/graph/v1/paper/search";

/// Paper search client: GET `?query=&limit=10&fields=title,abstract`,
/// optional `x-api-key` header.
pub struct HttpLitSearch {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
}

impl HttpLitSearch {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self { endpoint: endpoint.into(), api_key, timeout: Duration::from_secs(60) }
    }
}

#[derive(Deserialize)]
struct SearchPayload {
    #[serde(default)]
    data: Vec<SearchRow>,
}

#[derive(Deserialize)]
struct SearchRow {
    #[serde(rename = "paperId", default)]
    paper_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
}

impl LitSearchProvider for HttpLitSearch {
    fn id(&self) -> &str {
        "http-lit-search"
    }

    fn search(&self, query: &str) -> Result<Vec<LitSearchHit>, ProviderError> {
        let mut call = client(self.timeout)?
            .get(&self.endpoint)
            .query(&[("query", query), ("limit", "10"), ("fields", "title,abstract")]);
        if let Some(key) = &self.api_key {
            call = call.header("x-api-key", key);
        }
        let response = call.send().map_err(transport)?;
        let status = response.status();
        let payload = response.text().map_err(transport)?;
        if !status.is_success() {
            return Err(classify_status(status, &payload));
        }
        let parsed: SearchPayload = serde_json::from_str(&payload)
            .map_err(|e| ProviderError::Rejected(format!("unexpected search payload: {e}")))?;
        Ok(parsed
            .data
            .into_iter()
            .map(|row| LitSearchHit {
                title: row.title.unwrap_or_default(),
                abstract_text: row.abstract_text.unwrap_or_default(),
                source_id: row.paper_id.unwrap_or_default(),
            })
            .collect())
    }
}
