//! Run configuration: thresholds, role bindings, provider endpoints and
//! gateway settings, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use histaxo_gateway::cache::EmbeddingCache;
use histaxo_gateway::live::{OpenAiCompatible, ProviderConfig};
use histaxo_gateway::{
    AgentRole, ChatBackend, EmbeddingBackend, Gateway, MockProvider, RetryPolicy, RoleName, TemplateSet,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleBinding {
    pub provider: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl RoleBinding {
    fn new(provider: &str, model: &str, temperature: Option<f64>) -> Self {
        RoleBinding {
            provider: provider.into(),
            model: model.into(),
            temperature,
        }
    }

    pub fn agent(&self, name: RoleName) -> AgentRole {
        AgentRole::new(name, &self.provider, &self.model, self.temperature)
    }
}

const GPT4O: &str = "gpt-4o-2024-11-20";
const GPT5: &str = "gpt-5-2025-08-07";
const DEEPSEEK: &str = "DeepSeek-V3-0324";
const QWEN: &str = "qwen-plus-2025-07-28";

fn panel() -> Vec<RoleBinding> {
    vec![
        RoleBinding::new("deepseek", DEEPSEEK, Some(0.0)),
        RoleBinding::new("qwen", QWEN, Some(0.0)),
        RoleBinding::new("openai", GPT4O, Some(0.0)),
    ]
}

/// Role-to-model bindings. Extractors and generators are panels of
/// several models; every other role has one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolesConfig {
    pub extractors: Vec<RoleBinding>,
    pub generators: Vec<RoleBinding>,
    pub classifier: RoleBinding,
    pub merger: RoleBinding,
    pub judger: RoleBinding,
    pub expander: RoleBinding,
    pub conceptualizer: RoleBinding,
    pub enricher: RoleBinding,
    pub granularity_judge: RoleBinding,
}

impl Default for RolesConfig {
    fn default() -> Self {
        let strong = RoleBinding::new("openai", GPT5, None);
        let mid = RoleBinding::new("openai", GPT4O, Some(0.0));
        RolesConfig {
            extractors: panel(),
            generators: panel(),
            classifier: mid.clone(),
            merger: strong.clone(),
            judger: strong.clone(),
            expander: strong.clone(),
            conceptualizer: mid.clone(),
            enricher: strong,
            granularity_judge: mid,
        }
    }
}

impl RolesConfig {
    pub fn extractors(&self) -> Vec<AgentRole> {
        self.extractors.iter().map(|b| b.agent(RoleName::Extractor)).collect()
    }

    pub fn generators(&self) -> Vec<AgentRole> {
        self.generators.iter().map(|b| b.agent(RoleName::Generator)).collect()
    }

    pub fn single(&self, name: RoleName) -> AgentRole {
        let binding = match name {
            RoleName::Classifier => &self.classifier,
            RoleName::Merger => &self.merger,
            RoleName::Judger => &self.judger,
            RoleName::Expander => &self.expander,
            RoleName::Conceptualizer => &self.conceptualizer,
            RoleName::Enricher => &self.enricher,
            RoleName::GranularityJudge => &self.granularity_judge,
            RoleName::Extractor => &self.extractors[0],
            RoleName::Generator => &self.generators[0],
        };
        binding.agent(name)
    }

    fn all(&self) -> Vec<AgentRole> {
        let mut out = self.extractors();
        out.extend(self.generators());
        for name in [
            RoleName::Classifier,
            RoleName::Merger,
            RoleName::Judger,
            RoleName::Expander,
            RoleName::Conceptualizer,
            RoleName::Enricher,
            RoleName::GranularityJudge,
        ] {
            out.push(self.single(name));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySettings {
    /// Worker threads for concurrent calls; also the per-provider in-flight
    /// bound.
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub embedding_provider: String,
    pub embedding_model: String,
    /// Persistent embedding cache for live runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub cache_chat: bool,
    /// Directory of `<template>.txt` overrides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    /// Vector length of mock embeddings unless a fixture sets `dim`.
    pub mock_dim: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            parallelism: 4,
            retry: RetryPolicy::default(),
            embedding_provider: "openai".into(),
            embedding_model: "text-embedding-3-small".into(),
            cache_dir: None,
            cache_chat: false,
            templates_dir: None,
            mock_dim: histaxo_gateway::mock::DEFAULT_MOCK_DIM,
        }
    }
}

fn default_providers() -> BTreeMap<String, ProviderConfig> {
    let p = |url: &str, key: &str, base_env: &str| ProviderConfig {
        base_url: url.into(),
        api_key_env: key.into(),
        base_url_env: Some(base_env.into()),
        requests_per_minute: Some(60),
        timeout_secs: 120,
    };
    [
        (
            "openai",
            p("https://api.openai.com/v1", "OPENAI_API_KEY", "OPENAI_BASE_URL"),
        ),
        (
            "deepseek",
            p("https://api.deepseek.com/v1", "DEEPSEEK_API_KEY", "DEEPSEEK_BASE_URL"),
        ),
        (
            "qwen",
            p(
                "https://dashscope.aliyuncs.com/compatible-mode/v1",
                "DASHSCOPE_API_KEY",
                "DASHSCOPE_BASE_URL",
            ),
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Similarity threshold shared by dedup, redundancy checks and metrics.
    pub threshold: f64,
    /// Event types need a count strictly above this to be candidates.
    pub frequency_threshold: usize,
    /// Induction stops once a domain's top level is narrower than this.
    pub top_level_limit: usize,
    pub max_rounds: usize,
    /// Example passages shown to the classifier per event type.
    pub classify_samples: usize,
    pub roles: RolesConfig,
    pub gateway: GatewaySettings,
    pub providers: BTreeMap<String, ProviderConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threshold: histaxo_core::DEFAULT_THRESHOLD,
            frequency_threshold: histaxo_core::DEFAULT_FREQUENCY_THRESHOLD,
            top_level_limit: 10,
            max_rounds: 6,
            classify_samples: 3,
            roles: RolesConfig::default(),
            gateway: GatewaySettings::default(),
            providers: default_providers(),
        }
    }
}

/// How providers are served for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderMode {
    Mock { seed: u64, fixtures: Option<PathBuf> },
    Live,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex sha256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if self.frequency_threshold < 1 {
            return bad("frequency_threshold must be at least 1".into());
        }
        if self.top_level_limit < 2 {
            return bad("top_level_limit must be at least 2".into());
        }
        if self.max_rounds < 1 {
            return bad("max_rounds must be at least 1".into());
        }
        if self.roles.extractors.is_empty() || self.roles.generators.is_empty() {
            return bad("at least one extractor and one generator are required".into());
        }
        for role in self.roles.all() {
            role.validate().map_err(PipelineError::Config)?;
        }
        if self.gateway.retry.max_attempts < 1 {
            return bad("gateway.retry.max_attempts must be at least 1".into());
        }
        Ok(())
    }

    fn templates(&self) -> Result<TemplateSet, PipelineError> {
        Ok(match &self.gateway.templates_dir {
            Some(dir) => TemplateSet::with_overrides(dir)?,
            None => TemplateSet::default(),
        })
    }

    /// Builds the gateway for `mode`. Mock runs never touch the network or
    /// the persistent cache.
    pub fn gateway(&self, mode: &ProviderMode) -> Result<Gateway, PipelineError> {
        let gateway = match mode {
            ProviderMode::Mock { seed, fixtures } => {
                let mock = match fixtures {
                    Some(path) => MockProvider::from_path(*seed, path)?,
                    None => MockProvider::new(*seed).with_dim(self.gateway.mock_dim),
                };
                Gateway::mock(mock)
            }
            ProviderMode::Live => {
                let mut chat: BTreeMap<String, Arc<dyn ChatBackend>> = BTreeMap::new();
                let mut needed: Vec<String> = self.roles.all().into_iter().map(|r| r.provider).collect();
                needed.push(self.gateway.embedding_provider.clone());
                needed.sort();
                needed.dedup();
                let mut backends: BTreeMap<String, Arc<OpenAiCompatible>> = BTreeMap::new();
                for name in needed {
                    let cfg = self
                        .providers
                        .get(&name)
                        .ok_or_else(|| PipelineError::Config(format!("no [providers.{name}] section")))?;
                    let backend = Arc::new(OpenAiCompatible::from_config(&name, cfg)?);
                    chat.insert(name.clone(), backend.clone());
                    backends.insert(name, backend);
                }
                let embedder: Arc<dyn EmbeddingBackend> = backends[&self.gateway.embedding_provider].clone();
                let mut gateway = Gateway::new(
                    chat,
                    None,
                    embedder,
                    &self.gateway.embedding_provider,
                    &self.gateway.embedding_model,
                );
                if let Some(dir) = &self.gateway.cache_dir {
                    let file = dir.join(format!("embeddings-{}.jsonl", self.gateway.embedding_model));
                    gateway = gateway.with_embedding_cache(EmbeddingCache::persistent(&file)?);
                }
                gateway.with_chat_cache(self.gateway.cache_chat)
            }
        };
        Ok(gateway
            .with_templates(self.templates()?)
            .with_retry(self.gateway.retry)
            .with_parallelism(self.gateway.parallelism))
    }
}
