//! OpenAI-compatible HTTP backend (`/chat/completions`, `/embeddings`).

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::backend::{ChatBackend, EmbeddingBackend};
use crate::error::{BackendError, GatewayError};
use crate::role::ChatCall;

/// Connection settings for one provider endpoint.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// Environment variable that overrides `base_url` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

pub struct OpenAiCompatible {
    name: String,
    base_url: String,
    api_key: String,
    requests_per_minute: Option<u32>,
    client: reqwest::blocking::Client,
}

impl OpenAiCompatible {
    /// Resolves credentials from the environment.
    pub fn from_config(name: &str, config: &ProviderConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| GatewayError::ProviderUnavailable {
            provider: name.to_string(),
            attempts: 0,
            last: format!("environment variable {} is not set", config.api_key_env),
        })?;
        let base_url = config
            .base_url_env
            .as_ref()
            .and_then(|v| std::env::var(v).ok())
            .unwrap_or_else(|| config.base_url.clone());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::ProviderUnavailable {
                provider: name.to_string(),
                attempts: 0,
                last: e.to_string(),
            })?;
        Ok(OpenAiCompatible {
            name: name.to_string(),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            requests_per_minute: config.requests_per_minute,
            client,
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let response = self
            .client
            .post(format!("{}{}", self.base_url, path))
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transient(format!("{}: {e}", self.name)))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transient(format!("{}: reading body: {e}", self.name)))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("{}: HTTP {status}: {text}", self.name)));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("{}: HTTP {status}: {text}", self.name)));
        }
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Transient(format!("{}: invalid JSON body: {e}", self.name)))
    }
}

impl ChatBackend for OpenAiCompatible {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, BackendError> {
        let mut body = json!({
            "model": call.model,
            "messages": [{"role": "user", "content": call.prompt}],
        });
        if let Some(t) = call.temperature {
            body["temperature"] = json!(t);
        }
        let reply = self.post("/chat/completions", &body)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Transient(format!("{}: response has no message content", self.name)))
    }

    fn requests_per_minute(&self) -> Option<u32> {
        self.requests_per_minute
    }

    fn is_live(&self) -> bool {
        true
    }
}

#[derive(Deserialize)]
struct EmbeddingData {
    index: usize,
    embedding: Vec<f64>,
}

impl EmbeddingBackend for OpenAiCompatible {
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(512) {
            let reply = self.post("/embeddings", &json!({"model": model, "input": chunk}))?;
            let mut data: Vec<EmbeddingData> = serde_json::from_value(reply["data"].clone())
                .map_err(|e| BackendError::Transient(format!("{}: bad embedding payload: {e}", self.name)))?;
            if data.len() != chunk.len() {
                return Err(BackendError::Transient(format!(
                    "{}: asked for {} embeddings, got {}",
                    self.name,
                    chunk.len(),
                    data.len()
                )));
            }
            data.sort_by_key(|d| d.index);
            out.extend(data.into_iter().map(|d| d.embedding));
        }
        Ok(out)
    }

    fn is_live(&self) -> bool {
        true
    }
}
