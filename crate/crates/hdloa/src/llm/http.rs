//! HTTP backend for completion-style endpoints.
//!
//! The wire format is configurable rather than provider-specific: the
//! request body is a standard completion JSON object, and the response text
//! is extracted via a dot-separated field path (`choices.0.text` for legacy
//! completion APIs, `choices.0.message.content` for chat-shaped ones). The
//! credential comes from an environment variable named in the config, never
//! from the config file itself.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, CompletionRequest, LlmError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub api_key_env: String,
    #[serde(default = "default_response_field")]
    pub response_field: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_response_field() -> String {
    "choices.0.text".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            LlmError::Config(format!(
                "credential environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }
}

/// Walk a dot-separated path through a JSON value; numeric segments index
/// arrays.
fn extract_field<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    let mut current = value;
    for segment in path.split('.') {
        current = match current {
            Value::Array(items) => items.get(segment.parse::<usize>().ok()?)?,
            Value::Object(map) => map.get(segment)?,
            _ => return None,
        };
    }
    Some(current)
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.config.endpoint
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut body = serde_json::json!({
            "model": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = serde_json::json!(request.stop_sequences);
        }

        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::Transport {
                message: e.to_string(),
                transient: e.is_timeout() || e.is_connect(),
            })?;

        let status = response.status();
        let text = response.text().map_err(|e| LlmError::Transport {
            message: format!("reading response body: {e}"),
            transient: true,
        })?;

        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                message: text.chars().take(400).collect(),
            });
        }

        let parsed: Value = serde_json::from_str(&text).map_err(|e| LlmError::Transport {
            message: format!("response is not JSON: {e}"),
            transient: false,
        })?;
        match extract_field(&parsed, &self.config.response_field) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(LlmError::Transport {
                message: format!(
                    "response field {} is not a string: {other}",
                    self.config.response_field
                ),
                transient: false,
            }),
            None => Err(LlmError::Transport {
                message: format!(
                    "response field {} not found in body",
                    self.config.response_field
                ),
                transient: false,
            }),
        }
    }
}
