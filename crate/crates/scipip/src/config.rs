//! Run configuration with layered precedence: CLI flag > environment
//! variable > config file > built-in default.
//!
//! The config file is flat TOML. Unknown keys warn rather than fail. The
//! effective configuration (minus credentials and execution-only knobs like
//! thread count) is echoed into every output artifact for provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterConfig;
use crate::providers::http::{HttpChat, HttpEmbed, HttpLitSearch, HttpProviderConfig, DEFAULT_S2_ENDPOINT};
use crate::providers::{Gateway, ProviderError, ProviderStage, RetryPolicy};
use crate::retrieval::RetrievalConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    File(String),
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Environment variables recognized for provider credentials.
pub const ENV_CHAT_ENDPOINT: &str = "SCIPIP_CHAT_ENDPOINT";
pub const ENV_CHAT_KEY: &str = "SCIPIP_CHAT_KEY";
pub const ENV_EMBED_ENDPOINT: &str = "SCIPIP_EMBED_ENDPOINT";
pub const ENV_EMBED_KEY: &str = "SCIPIP_EMBED_KEY";
pub const ENV_S2_KEY: &str = "SCIPIP_S2_KEY";

/// Connection settings for one chat backend.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChatBackend {
    pub endpoint: Option<String>,
    #[serde(skip_serializing)]
    pub key: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProviderSettings {
    pub chat: ChatBackend,
    /// Per-stage chat overrides keyed by "extraction", "proposal",
    /// "evaluation"; anything unset falls back to the default backend.
    pub chat_overrides: BTreeMap<String, ChatBackend>,
    pub embed_endpoint: Option<String>,
    pub embed_key: Option<String>,
    pub embed_model: Option<String>,
    pub s2_endpoint: Option<String>,
    pub s2_key: Option<String>,
}

/// Everything a subcommand needs to run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub db_dir: Option<PathBuf>,
    pub embedding_dim: usize,
    pub parallelism: usize,
    pub seed: Option<u64>,
    pub mock_providers: bool,
    pub cache_dir: Option<PathBuf>,
    pub retrieval: RetrievalConfig,
    pub cluster: ClusterConfig,
    pub digest_budget: usize,
    pub providers: ProviderSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            db_dir: None,
            embedding_dim: 64,
            parallelism: 4,
            seed: None,
            mock_providers: false,
            cache_dir: None,
            retrieval: RetrievalConfig::default(),
            cluster: ClusterConfig::default(),
            digest_budget: crate::proposer::DigestConfig::default().char_budget,
            providers: ProviderSettings::default(),
        }
    }
}

/// The provenance slice of the configuration embedded into artifacts.
/// Credentials never appear; the thread count is deliberately excluded so
/// outputs stay byte-identical across parallelism settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub db: Option<String>,
    pub embedding_dim: usize,
    pub seed: Option<u64>,
    pub mock_providers: bool,
    pub retrieval: RetrievalConfig,
    pub cluster: ClusterConfig,
    pub digest_budget: usize,
    pub chat_endpoint: Option<String>,
    pub embed_endpoint: Option<String>,
}

impl RunConfig {
    pub fn effective(&self) -> EffectiveConfig {
        EffectiveConfig {
            db: self.db_dir.as_ref().map(|p| p.display().to_string()),
            embedding_dim: self.embedding_dim,
            seed: self.seed,
            mock_providers: self.mock_providers,
            retrieval: self.retrieval.clone(),
            cluster: self.cluster,
            digest_budget: self.digest_budget,
            chat_endpoint: self.providers.chat.endpoint.clone(),
            embed_endpoint: self.providers.embed_endpoint.clone(),
        }
    }

    /// Builds the provider gateway: deterministic mocks when requested
    /// (seed mandatory), HTTP providers otherwise.
    pub fn gateway(&self) -> Result<Gateway, ProviderError> {
        if self.mock_providers {
            let seed = self.seed.ok_or_else(|| {
                ProviderError::NotConfigured("--seed is mandatory with --mock-providers".into())
            })?;
            return Ok(Gateway::mock(seed, self.embedding_dim).with_parallelism(self.parallelism));
        }
        let chat_endpoint = self.providers.chat.endpoint.clone().ok_or_else(|| {
            ProviderError::NotConfigured(format!(
                "chat endpoint missing (set {} or chat_endpoint in the config file)",
                ENV_CHAT_ENDPOINT
            ))
        })?;
        let embed_endpoint = self.providers.embed_endpoint.clone().ok_or_else(|| {
            ProviderError::NotConfigured(format!(
                "embedding endpoint missing (set {} or embed_endpoint in the config file)",
                ENV_EMBED_ENDPOINT
            ))
        })?;
        let chat = HttpChat::new(HttpProviderConfig {
            endpoint: chat_endpoint,
            api_key: self.providers.chat.key.clone(),
            model: self.providers.chat.model.clone(),
            timeout: std::time::Duration::from_secs(120),
        });
        let embed = HttpEmbed::new(HttpProviderConfig {
            endpoint: embed_endpoint,
            api_key: self.providers.embed_key.clone(),
            model: self.providers.embed_model.clone(),
            timeout: std::time::Duration::from_secs(120),
        });
        let search = HttpLitSearch::new(
            self.providers
                .s2_endpoint
                .clone()
                .unwrap_or_else(|| DEFAULT_S2_ENDPOINT.to_string()),
            self.providers.s2_key.clone(),
        );
        let mut gateway = Gateway::new(
            Arc::new(chat),
            Arc::new(embed),
            Arc::new(search),
            RetryPolicy::default(),
            self.parallelism,
            self.embedding_dim,
        );
        for (stage_name, backend) in &self.providers.chat_overrides {
            let stage = match stage_name.as_str() {
                "extraction" => ProviderStage::Construction,
                "proposal" => ProviderStage::Proposal,
                "evaluation" => ProviderStage::Evaluation,
                _ => continue,
            };
            if let Some(endpoint) = &backend.endpoint {
                gateway = gateway.with_chat_override(
                    stage,
                    Arc::new(HttpChat::new(HttpProviderConfig {
                        endpoint: endpoint.clone(),
                        api_key: backend.key.clone().or_else(|| self.providers.chat.key.clone()),
                        model: backend.model.clone(),
                        timeout: std::time::Duration::from_secs(120),
                    })),
                );
            }
        }
        Ok(gateway)
    }
}

/// Loads defaults, then the config file (when present), then environment
/// variables. Returns warnings for unknown file keys.
pub fn load_config(
    file: Option<&Path>,
    env: &BTreeMap<String, String>,
) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let mut config = RunConfig::default();
    let mut warnings = Vec::new();

    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        let table: toml::Table =
            text.parse().map_err(|e| ConfigError::File(format!("{}: {}", path.display(), e)))?;
        apply_file_keys(&mut config, &table, &mut warnings)?;
    }

    let getenv = |key: &str| env.get(key).filter(|v| !v.trim().is_empty()).cloned();
    if let Some(v) = getenv(ENV_CHAT_ENDPOINT) {
        config.providers.chat.endpoint = Some(v);
    }
    if let Some(v) = getenv(ENV_CHAT_KEY) {
        config.providers.chat.key = Some(v);
    }
    if let Some(v) = getenv(ENV_EMBED_ENDPOINT) {
        config.providers.embed_endpoint = Some(v);
    }
    if let Some(v) = getenv(ENV_EMBED_KEY) {
        config.providers.embed_key = Some(v);
    }
    if let Some(v) = getenv(ENV_S2_KEY) {
        config.providers.s2_key = Some(v);
    }

    Ok((config, warnings))
}

fn apply_file_keys(
    config: &mut RunConfig,
    table: &toml::Table,
    warnings: &mut Vec<String>,
) -> Result<(), ConfigError> {
    let invalid = |key: &str, message: String| ConfigError::Invalid { key: key.into(), message };
    for (key, value) in table {
        let as_str = || -> Result<String, ConfigError> {
            value
                .as_str()
                .map(|s| s.to_string())
                .ok_or_else(|| invalid(key, "expected a string".into()))
        };
        let as_usize = || -> Result<usize, ConfigError> {
            value
                .as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .ok_or_else(|| invalid(key, "expected a non-negative integer".into()))
        };
        let as_bool = || -> Result<bool, ConfigError> {
            value.as_bool().ok_or_else(|| invalid(key, "expected a boolean".into()))
        };
        let as_f64 = || -> Result<f64, ConfigError> {
            value
                .as_float()
                .or_else(|| value.as_integer().map(|i| i as f64))
                .ok_or_else(|| invalid(key, "expected a number".into()))
        };
        match key.as_str() {
            "db" => config.db_dir = Some(PathBuf::from(as_str()?)),
            "dim" => config.embedding_dim = as_usize()?,
            "parallel" => config.parallelism = as_usize()?,
            "seed" => {
                config.seed = Some(
                    value
                        .as_integer()
                        .and_then(|i| u64::try_from(i).ok())
                        .ok_or_else(|| invalid(key, "expected a non-negative integer".into()))?,
                )
            }
            "mock_providers" => config.mock_providers = as_bool()?,
            "cache" => config.cache_dir = Some(PathBuf::from(as_str()?)),
            "k" => config.retrieval.k_semantic = as_usize()?,
            "m" => {
                config.retrieval.min_co_papers = value
                    .as_integer()
                    .and_then(|i| u32::try_from(i).ok())
                    .ok_or_else(|| invalid(key, "expected a non-negative integer".into()))?
            }
            "n" => config.retrieval.n_rare = as_usize()?,
            "cocite_top" => config.retrieval.co_cite_top = as_usize()?,
            "semantics" => config.retrieval.use_semantics = as_bool()?,
            "entities" => config.retrieval.use_entities = as_bool()?,
            "cocitation" => config.retrieval.use_cocitation = as_bool()?,
            "clustering" => config.retrieval.use_clustering = as_bool()?,
            "cluster_threshold" => config.cluster.threshold = as_f64()?,
            "w_summary" => config.cluster.w_summary = as_f64()?,
            "w_ideas" => config.cluster.w_ideas = as_f64()?,
            "digest_budget" => config.digest_budget = as_usize()?,
            "chat_endpoint" => config.providers.chat.endpoint = Some(as_str()?),
            "chat_key" => config.providers.chat.key = Some(as_str()?),
            "chat_model" => config.providers.chat.model = Some(as_str()?),
            "embed_endpoint" => config.providers.embed_endpoint = Some(as_str()?),
            "embed_key" => config.providers.embed_key = Some(as_str()?),
            "embed_model" => config.providers.embed_model = Some(as_str()?),
            "s2_endpoint" => config.providers.s2_endpoint = Some(as_str()?),
            "s2_key" => config.providers.s2_key = Some(as_str()?),
            other => {
                if let Some(stage) = other
                    .strip_prefix("chat_endpoint_")
                    .map(|s| (s, "endpoint"))
                    .or_else(|| other.strip_prefix("chat_key_").map(|s| (s, "key")))
                    .or_else(|| other.strip_prefix("chat_model_").map(|s| (s, "model")))
                {
                    let (stage_name, field) = stage;
                    if ["extraction", "proposal", "evaluation"].contains(&stage_name) {
                        let entry =
                            config.providers.chat_overrides.entry(stage_name.to_string()).or_default();
                        let v = Some(as_str()?);
                        match field {
                            "endpoint" => entry.endpoint = v,
                            "key" => entry.key = v,
                            _ => entry.model = v,
                        }
                        continue;
                    }
                }
                warnings.push(format!("unknown config key {:?} ignored", other));
            }
        }
    }
    Ok(())
}
