use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "GUARDSCAN_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "GUARDSCAN_LLM_MODEL";
pub const ENV_API_KEY: &str = "GUARDSCAN_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
}

impl ProviderError {
    /// Only transport-level failures are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, prompt: &str, timeout: Duration) -> Result<String, ProviderError>;
}

impl<F> CompletionProvider for F
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, prompt: &str, _timeout: Duration) -> Result<String, ProviderError> {
        self(prompt)
    }
}

/// Settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Extra request fields such as `temperature`; omitted means provider defaults.
    pub params: serde_json::Map<String, Value>,
}

impl HttpProviderConfig {
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok()?;
        Some(Self {
            endpoint,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into()),
            api_key: std::env::var(ENV_API_KEY).ok(),
            params: Default::default(),
        })
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn request_body(&self, prompt: &str) -> String {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Value::Object(map) = &mut body {
            for (k, v) in &self.config.params {
                map.insert(k.clone(), v.clone());
            }
        }
        body.to_string()
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, prompt: &str, timeout: Duration) -> Result<String, ProviderError> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(self.request_body(prompt)).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ProviderError::Timeout,
                other => ProviderError::Transport(other.to_string()),
            })?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status { status, body });
        }
        extract_content(&body).ok_or(ProviderError::Status { status, body })
    }
}

/// `choices[0].message.content` of a chat completion response.
pub fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?
        .as_str()
        .map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"[\"donate(address)\"]"}}]}"#;
        assert_eq!(extract_content(body).as_deref(), Some("[\"donate(address)\"]"));
        assert_eq!(extract_content("{}"), None);
        assert_eq!(extract_content("not json"), None);
    }

    #[test]
    fn request_body_merges_params() {
        let mut cfg = HttpProviderConfig {
            endpoint: "http://127.0.0.1:1/v1".into(),
            model: "m".into(),
            api_key: None,
            params: Default::default(),
        };
        cfg.params.insert("temperature".into(), json!(0));
        let p = HttpProvider::new(cfg);
        let v: Value = serde_json::from_str(&p.request_body("hi")).unwrap();
        assert_eq!(v["model"], "m");
        assert_eq!(v["temperature"], 0);
        assert_eq!(v["messages"][0]["content"], "hi");
    }
}
